#include "hecon/hecon.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "diagnostics.hpp"
#include "econ.hpp"
#include "error.hpp"
#include "pipeline.hpp"
#include "trial_data.hpp"

struct hecon_dataset {
  hecon::TrialDataset data;
};

namespace {

thread_local std::string g_last_error;

hecon_status to_status(hecon::ErrorCode c) {
  using hecon::ErrorCode;
  switch (c) {
    case ErrorCode::InvalidArgument: return HECON_E_INVALID_ARGUMENT;
    case ErrorCode::Parse: return HECON_E_PARSE;
    case ErrorCode::Schema: return HECON_E_SCHEMA;
    case ErrorCode::Validation: return HECON_E_VALIDATION;
    case ErrorCode::Io: return HECON_E_IO;
    case ErrorCode::Numeric: return HECON_E_NUMERIC;
    case ErrorCode::Config: return HECON_E_CONFIG;
    case ErrorCode::Dependency: return HECON_E_DEPENDENCY;
    case ErrorCode::Convergence: return HECON_E_CONVERGENCE;
    case ErrorCode::Unit: return HECON_E_UNIT;
    case ErrorCode::Shape: return HECON_E_SHAPE;
    case ErrorCode::Internal: return HECON_E_INTERNAL;
  }
  return HECON_E_INTERNAL;
}

template <typename Fn>
hecon_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const hecon::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HECON_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HECON_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return HECON_E_INTERNAL;
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) hecon::fail(hecon::ErrorCode::InvalidArgument, what);
}

std::vector<std::vector<double>> split_chains(const double* chains, size_t n_chains, size_t n_draws) {
  require(chains != nullptr, "chains must not be NULL");
  std::vector<std::vector<double>> out;
  for (size_t c = 0; c < n_chains; ++c) out.emplace_back(chains + c * n_draws, chains + (c + 1) * n_draws);
  return out;
}

}  // namespace

extern "C" {

const char* hecon_version(void) { return "0.1.0"; }

const char* hecon_last_error(void) { return g_last_error.c_str(); }

const char* hecon_status_name(hecon_status s) {
  switch (s) {
    case HECON_OK: return "ok";
    case HECON_E_INVALID_ARGUMENT: return "invalid_argument";
    case HECON_E_PARSE: return "parse";
    case HECON_E_SCHEMA: return "schema";
    case HECON_E_VALIDATION: return "validation";
    case HECON_E_IO: return "io";
    case HECON_E_NUMERIC: return "numeric";
    case HECON_E_CONFIG: return "config";
    case HECON_E_DEPENDENCY: return "dependency";
    case HECON_E_CONVERGENCE: return "convergence";
    case HECON_E_UNIT: return "unit";
    case HECON_E_SHAPE: return "shape";
    case HECON_E_INTERNAL: return "internal";
  }
  return "unknown";
}

void hecon_string_free(char* s) { std::free(s); }

hecon_status hecon_dataset_load_csv(const char* path, int J, hecon_dataset** out) {
  return guarded([&] {
    require(path && out, "path and out must not be NULL");
    *out = nullptr;
    auto* d = new hecon_dataset{hecon::load_trial_csv(path, J)};
    *out = d;
    return HECON_OK;
  });
}

hecon_status hecon_dataset_from_csv_text(const char* text, int J, hecon_dataset** out) {
  return guarded([&] {
    require(text && out, "text and out must not be NULL");
    *out = nullptr;
    auto* d = new hecon_dataset{hecon::parse_trial_csv_text(text, J)};
    *out = d;
    return HECON_OK;
  });
}

void hecon_dataset_free(hecon_dataset* data) { delete data; }

hecon_status hecon_dataset_num_subjects(const hecon_dataset* data, size_t* out) {
  return guarded([&] {
    require(data && out, "data and out must not be NULL");
    *out = data->data.subjects.size();
    return HECON_OK;
  });
}

hecon_status hecon_dataset_patterns_json(const hecon_dataset* data, char** out_json) {
  return guarded([&] {
    require(data && out_json, "data and out_json must not be NULL");
    *out_json = copy_string(hecon::pattern_table_to_json(hecon::classify_patterns(data->data)));
    return HECON_OK;
  });
}

hecon_status hecon_dataset_to_json(const hecon_dataset* data, char** out_json) {
  return guarded([&] {
    require(data && out_json, "data and out_json must not be NULL");
    *out_json = copy_string(hecon::trial_to_json(data->data));
    return HECON_OK;
  });
}

hecon_status hecon_run_command(const char* command, const char* config_path, const char* overrides_json,
                               char** report_json) {
  return guarded([&] {
    require(command != nullptr, "command must not be NULL");
    if (report_json) *report_json = nullptr;
    const hecon::RunConfig cfg =
        hecon::load_run_config(config_path ? config_path : "", overrides_json ? overrides_json : "");
    const hecon::CommandReport rep = hecon::run_command(command, cfg);
    if (report_json) *report_json = copy_string(rep.to_json());
    if (rep.rhat_exceeded) {
      g_last_error = "some R-hat exceeds 1.1 (max " + std::to_string(rep.max_rhat) + "); outputs were written";
      return HECON_E_CONVERGENCE;
    }
    return HECON_OK;
  });
}

hecon_status hecon_qaly(const double* u, size_t n, const double* fractions, double* out) {
  return guarded([&] {
    require(u && out && n >= 1 && (n == 1 || fractions), "invalid arguments to hecon_qaly");
    *out = hecon::qaly(std::vector<double>(u, u + n), std::vector<double>(fractions, fractions + (n - 1)));
    return HECON_OK;
  });
}

hecon_status hecon_icer(const double* delta_e, const double* delta_c, size_t n, double* out) {
  return guarded([&] {
    require(delta_e && delta_c && out, "invalid arguments to hecon_icer");
    *out = hecon::icer(std::vector<double>(delta_e, delta_e + n), std::vector<double>(delta_c, delta_c + n));
    return HECON_OK;
  });
}

hecon_status hecon_ceac(const double* delta_e, const double* delta_c, size_t n, const double* k, size_t n_k,
                        double* probability_out) {
  return guarded([&] {
    require(delta_e && delta_c && k && probability_out, "invalid arguments to hecon_ceac");
    const auto curve = hecon::ceac(std::vector<double>(delta_e, delta_e + n), std::vector<double>(delta_c, delta_c + n),
                                   std::vector<double>(k, k + n_k));
    for (size_t i = 0; i < n_k; ++i) probability_out[i] = curve[i].probability;
    return HECON_OK;
  });
}

hecon_status hecon_rhat(const double* chains, size_t n_chains, size_t n_draws, double* out) {
  return guarded([&] {
    require(out != nullptr, "out must not be NULL");
    *out = hecon::rhat(split_chains(chains, n_chains, n_draws));
    return HECON_OK;
  });
}

hecon_status hecon_ess(const double* chains, size_t n_chains, size_t n_draws, double* out) {
  return guarded([&] {
    require(out != nullptr, "out must not be NULL");
    *out = hecon::ess(split_chains(chains, n_chains, n_draws));
    return HECON_OK;
  });
}

}  // extern "C"

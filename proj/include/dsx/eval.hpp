#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsx/beamform.hpp"
#include "dsx/mixgen.hpp"
#include "dsx/net.hpp"

namespace dsx {

// Scale-invariant SDR in dB, clamped to [-100, 100].
double si_sdr(const std::vector<double>& est, const std::vector<double>& ref);

enum class SystemKind { Neural, DelayAndSum, Mvdr, Identity };

struct SystemUnderTest {
  std::string name;             // e.g. neural_struct, neural_flat, das, mvdr
  SystemKind kind = SystemKind::Identity;
  const Model* model = nullptr;  // required for Neural
  ArrayGeometry geometry;        // required for Das/Mvdr
  double diagonal_loading = 1e-3;
};

struct EvalRow {
  std::string record_id;
  std::string system;
  int n_sectors = 0;
  uint32_t selected_sectors = 0;
  int n_selected = 0;
  double input_si_sdr_db = 0.0;
  double output_si_sdr_db = 0.0;
  double si_sdri_db = 0.0;
};

struct EvalAggregate {
  std::string system;
  std::string group;  // "all", "k=1", "sector=3", ...
  int count = 0;
  double mean_si_sdri_db = 0.0;
  double std_si_sdri_db = 0.0;
  double fraction_positive = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<EvalAggregate> aggregates;
};

// Runs each system over the manifest (records without a target source are
// skipped; SI-SDR needs a nonzero reference). Metrics exclude the
// interferer-only noise head. Aggregates are per system, per selected-sector
// count, and per sector index for single-sector rows.
EvalReport evaluate(const MixtureManifest& manifest,
                    const std::vector<SystemUnderTest>& systems);

void report_to_csv(const EvalReport& report, const std::string& path);
void report_to_json(const EvalReport& report, const std::string& path);

// Mean SI-SDRi of one system over rows matching a predicate.
double mean_si_sdri(const EvalReport& report, const std::string& system,
                    int n_selected = 0 /* 0 = all */);

}  // namespace dsx

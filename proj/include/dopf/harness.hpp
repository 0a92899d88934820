// Copyright 2026 The dopf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Experiment orchestration: tolerance and cost sweeps, iteration reduction,
// mismatch histograms, and the tables every command writes.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dopf/admm.hpp"
#include "dopf/caseio.hpp"
#include "dopf/netmodel.hpp"
#include "dopf/tighten.hpp"
#include "dopf/wcv.hpp"

namespace dopf {

struct Experiment {
  std::string case_name;
  std::shared_ptr<const Network> network;
  Decomposition decomposition;
  std::vector<std::string> warnings;  // partition warnings
};

/// Loads a case and its partition. An empty partition path uses the
/// fallback partition with `regions` regions.
Experiment load_experiment(const std::string& case_path, const std::string& partition_path = {}, int regions = 3);

/// Builds an experiment from an in-memory network and partition.
Experiment make_experiment(std::string case_name, const RawCase& raw, const PartitionSpec& partition);

struct ExperimentPlan {
  std::vector<double> eps_grid;
  std::vector<double> budgets;  // 1 means no budget
  double load_factor = 0.5;
  int trials = 100;
  std::uint64_t seed = 1;
  AdmmConfig admm{};
  TighteningConfig tightening{};  // eps, budget and load factor are set per run
  int threads = 1;
};

/// Leading columns shared by every experiment table.
struct Provenance {
  std::string case_name;
  int regions = 0;
  double alpha = 0.0;
  double eps = 0.0;
  std::optional<double> budget;
  double load_factor = 0.0;
  std::uint64_t seed = 0;
};

std::vector<std::string> provenance_columns();
std::vector<Cell> provenance_cells(const Provenance& p);

/// Table whose columns are the provenance columns followed by `more`.
Table make_table(std::vector<std::string> more);

// ---------------------------------------------------------------------------

struct ToleranceRow {
  double eps = 0.0;
  int runs = 0;      // trials that reached the tolerance and gave a power flow
  int failures = 0;
  std::vector<double> iterations;
  std::vector<double> violation_count;
  std::vector<double> violation_percent;
};

struct ToleranceSweep {
  std::vector<ToleranceRow> rows;  // in grid order
  Table table;
  std::vector<PlotSeries> plot;
};

/// For each trial, samples loads, runs ADMM on the untightened case down to
/// the smallest grid tolerance while recording the dispatch at every larger
/// one, and measures the violations each dispatch causes. The ADMM
/// trajectory does not depend on the target, so this equals separate runs.
ToleranceSweep sweep_tolerance(const Experiment& exp, const ExperimentPlan& plan);

struct CostPoint {
  double eps = 0.0;
  double budget = 1.0;
  TighteningStatus status = TighteningStatus::Failed;
  std::optional<double> gap;
  int outer_iterations = 0;
  double seconds = 0.0;
};

struct CostSweep {
  double base_objective = 0.0;
  std::vector<CostPoint> points;
  Table table;
  std::vector<PlotSeries> plot;
};

/// Tightens for every (eps, budget) pair and reports the cost gap of the
/// nominal tightened OPF, or an infeasible marker.
CostSweep sweep_cost(const Experiment& exp, const ExperimentPlan& plan);

struct IterationReduction {
  double reduction = 0.0;
  double median_original = 0.0;
  double median_tightened = 0.0;
  int failures = 0;
  Table table;
};

/// (nu_orig - nu_tight) / nu_orig with nu the median ADMM iteration count
/// over sampled loads: untightened at eps_orig, with `tightening` at
/// eps_tight.
IterationReduction iteration_reduction(const Experiment& exp, double eps_orig, double eps_tight,
                                       const TightenedBounds& tightening, const ExperimentPlan& plan);

struct Histogram {
  std::vector<double> edges;       // log-spaced, ascending
  std::vector<int> counts;         // counts[i] covers [edges[i], edges[i+1])
  int below = 0;                   // mismatches smaller than edges.front(), including exact zeros
  double max_mismatch = 0.0;
  int total = 0;
};

/// Log-binned histogram of values with `per_decade` bins per decade from
/// `lowest` up to the largest value.
Histogram log_histogram(const std::vector<double>& values, double lowest = 1e-12, int per_decade = 2);

/// Peer mismatches of one converged run at sampled loads.
Histogram mismatch_histogram(const Experiment& exp, double eps, const ExperimentPlan& plan);

// ---------------------------------------------------------------------------
// Tables

Table trace_table(const AdmmResult& r, const Provenance& p);
Table report_table(const Network& net, const ViolationReport& r, const Provenance& p);
Table lambda_table(const Network& net, const TightenedBounds& lambda, const std::vector<BoundId>& bounds,
                   const Provenance& p);
Table certification_table(const CertificationReport& r, const Provenance& p);
Table dispatch_table(const Network& net, const Dispatch& d, const Provenance& p);
Table histogram_table(const Histogram& h, const Provenance& p);

/// Reads a tightening written by lambda_table. Bounds that are not listed
/// stay at zero.
TightenedBounds parse_lambda_table(const Network& net, std::string_view csv);

}  // namespace dopf

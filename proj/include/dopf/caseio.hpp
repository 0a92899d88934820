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

// MATPOWER case files, partition files, and the CSV / plot-data outputs.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dopf {

// Bus types as used in the MATPOWER bus table.
inline constexpr int kBusPQ = 1;
inline constexpr int kBusPV = 2;
inline constexpr int kBusRef = 3;
inline constexpr int kBusIsolated = 4;

// Quantities stay in MATPOWER native units (MW, MVAr, degrees, per unit
// voltages). Per-unit conversion happens when building a Network.
struct BusRow {
  int id = 0;
  int type = kBusPQ;
  double pd = 0.0;
  double qd = 0.0;
  double gs = 0.0;
  double bs = 0.0;
  int area = 1;
  double vm = 1.0;
  double va = 0.0;
  double base_kv = 0.0;
  int zone = 1;
  double vmax = 1.1;
  double vmin = 0.9;

  bool operator==(const BusRow&) const = default;
};

struct GenRow {
  int bus = 0;
  double pg = 0.0;
  double qg = 0.0;
  double qmax = 0.0;
  double qmin = 0.0;
  double vg = 1.0;
  double mbase = 100.0;
  int status = 1;
  double pmax = 0.0;
  double pmin = 0.0;

  bool operator==(const GenRow&) const = default;
};

struct BranchRow {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;
  double rate_a = 0.0;
  double rate_b = 0.0;
  double rate_c = 0.0;
  double tap = 0.0;  // 0 means nominal (1.0)
  double shift = 0.0;
  int status = 1;
  double angmin = -360.0;
  double angmax = 360.0;

  bool operator==(const BranchRow&) const = default;
};

/// Polynomial generator cost. `coefficients` runs from the highest order
/// term down to the constant, exactly as in the gencost table.
struct CostRow {
  int model = 2;
  double startup = 0.0;
  double shutdown = 0.0;
  std::vector<double> coefficients;

  bool operator==(const CostRow&) const = default;
};

struct RawCase {
  std::string name;
  double base_mva = 100.0;
  std::vector<BusRow> buses;
  std::vector<GenRow> generators;
  std::vector<BranchRow> branches;
  std::vector<CostRow> costs;  // one row per generator, same order

  bool operator==(const RawCase&) const = default;
};

/// Parses a MATPOWER `.m` case body. Out-of-service generators and branches
/// (status 0) and isolated buses (type 4) are dropped; piecewise-linear
/// costs are rejected.
RawCase parse_case(std::string_view text);
RawCase load_case(const std::string& path);

/// Serializes in MATPOWER format; `parse_case(write_case(c)) == c`.
std::string write_case(const RawCase& c);

/// Checks the referential invariants: every branch and generator endpoint
/// names an existing bus and exactly one bus is the reference.
void validate_case(const RawCase& c);

struct PartitionSpec {
  int region_count = 0;
  std::map<int, int> region_of_bus;   // bus id -> region id in 1..region_count
  std::vector<std::string> warnings;  // e.g. a region whose subgraph is disconnected
};

/// Parses `bus_id region_id` lines (`#` starts a comment) and validates the
/// assignment against the buses of `c`.
PartitionSpec parse_partition(std::string_view text, const RawCase& c);
PartitionSpec load_partition(const std::string& path, const RawCase& c);
std::string write_partition(const PartitionSpec& spec);

/// Deterministic partitioner: multi-source breadth-first growth from the `k`
/// highest-degree buses (ties broken by lowest bus id).
PartitionSpec fallback_partition(const RawCase& c, int k);

// ---------------------------------------------------------------------------
// Tabular output

using Cell = std::variant<double, std::int64_t, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
};

/// RFC 4180 CSV: header line, CRLF-free `\n` line endings, fields quoted
/// only when they contain a comma, quote or newline. Doubles are written
/// with 17 significant digits so they round-trip exactly.
std::string write_report(const Table& table);

/// Parses CSV text into a header plus string records.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

std::string format_double(double value);

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Gnuplot-style data: a `# name` line, then `x y` rows, series separated
/// by a blank line.
std::string write_plot_data(const std::vector<PlotSeries>& series);

void write_text_file(const std::string& path, std::string_view contents);
std::string read_text_file(const std::string& path);

}  // namespace dopf

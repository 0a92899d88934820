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

#include "dopf/caseio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

#include "dopf/error.hpp"

namespace dopf {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedTable: return "MalformedTable";
    case ErrorKind::MissingSection: return "MissingSection";
    case ErrorKind::DuplicateBusId: return "DuplicateBusId";
    case ErrorKind::UnsupportedCost: return "UnsupportedCost";
    case ErrorKind::InvalidCase: return "InvalidCase";
    case ErrorKind::UnassignedBus: return "UnassignedBus";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::UnknownBusId: return "UnknownBusId";
    case ErrorKind::ZeroImpedanceBranch: return "ZeroImpedanceBranch";
    case ErrorKind::CrossedBounds: return "CrossedBounds";
    case ErrorKind::NonpositiveBase: return "NonpositiveBase";
    case ErrorKind::CallbackFailure: return "CallbackFailure";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (char ch : text) {
    if (ch == '\n') {
      in_comment = false;
      out.push_back(ch);
    } else if (ch == '%') {
      in_comment = true;
    } else if (!in_comment) {
      out.push_back(ch);
    }
  }
  return out;
}

double parse_number(const std::string& token, const std::string& table) {
  if (token == "Inf" || token == "inf") return std::numeric_limits<double>::infinity();
  if (token == "-Inf" || token == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw Error(ErrorKind::MalformedTable, "non-numeric entry '" + token + "' in mpc." + table);
  }
  return value;
}

// Returns the rows of `mpc.<name> = [ ... ];`, or nullopt if absent.
std::optional<std::vector<std::vector<double>>> read_matrix(const std::string& body,
                                                            const std::string& name) {
  const std::regex head("mpc\\." + name + "\\s*=\\s*\\[");
  std::smatch match;
  if (!std::regex_search(body, match, head)) return std::nullopt;
  const std::size_t start = static_cast<std::size_t>(match.position(0) + match.length(0));
  const std::size_t stop = body.find(']', start);
  if (stop == std::string::npos) {
    throw Error(ErrorKind::MalformedTable, "unterminated mpc." + name);
  }
  std::vector<std::vector<double>> rows;
  std::vector<double> row;
  std::string token;
  auto flush_token = [&] {
    if (!token.empty()) {
      row.push_back(parse_number(token, name));
      token.clear();
    }
  };
  auto flush_row = [&] {
    flush_token();
    if (!row.empty()) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = start; i < stop; ++i) {
    const char ch = body[i];
    if (ch == ';' || ch == '\n') {
      flush_row();
    } else if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
      flush_token();
    } else {
      token.push_back(ch);
    }
  }
  flush_row();
  return rows;
}

void require_arity(const std::vector<std::vector<double>>& rows, std::size_t min_cols,
                   const std::string& name) {
  if (rows.empty()) return;
  const std::size_t width = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width || rows[r].size() < min_cols) {
      throw Error(ErrorKind::MalformedTable, "mpc." + name + " row " + std::to_string(r + 1) +
                                                 " has " + std::to_string(rows[r].size()) +
                                                 " columns, expected " +
                                                 std::to_string(std::max(width, min_cols)));
    }
  }
}

int as_int(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

RawCase parse_case(std::string_view text) {
  const std::string body = strip_comments(text);
  RawCase c;

  std::smatch match;
  const std::regex fn("function\\s+(?:\\w+\\s*=\\s*)?(\\w+)");
  if (std::regex_search(body, match, fn)) c.name = match[1];

  const std::regex base("mpc\\.baseMVA\\s*=\\s*([^;\\n]+)");
  if (!std::regex_search(body, match, base)) {
    throw Error(ErrorKind::MissingSection, "mpc.baseMVA not found");
  }
  c.base_mva = parse_number(std::regex_replace(match[1].str(), std::regex("\\s+"), ""), "baseMVA");

  auto bus = read_matrix(body, "bus");
  auto gen = read_matrix(body, "gen");
  auto branch = read_matrix(body, "branch");
  if (!bus) throw Error(ErrorKind::MissingSection, "mpc.bus not found");
  if (!gen) throw Error(ErrorKind::MissingSection, "mpc.gen not found");
  if (!branch) throw Error(ErrorKind::MissingSection, "mpc.branch not found");
  auto gencost = read_matrix(body, "gencost");

  require_arity(*bus, 13, "bus");
  require_arity(*gen, 10, "gen");
  require_arity(*branch, 11, "branch");

  std::set<int> seen;
  std::set<int> isolated;
  for (const auto& r : *bus) {
    BusRow b;
    b.id = as_int(r[0]);
    b.type = as_int(r[1]);
    b.pd = r[2];
    b.qd = r[3];
    b.gs = r[4];
    b.bs = r[5];
    b.area = as_int(r[6]);
    b.vm = r[7];
    b.va = r[8];
    b.base_kv = r[9];
    b.zone = as_int(r[10]);
    b.vmax = r[11];
    b.vmin = r[12];
    if (!seen.insert(b.id).second) {
      throw Error(ErrorKind::DuplicateBusId, "bus " + std::to_string(b.id) + " listed twice");
    }
    if (b.type == kBusIsolated) {
      isolated.insert(b.id);
      continue;
    }
    c.buses.push_back(b);
  }

  if (gencost) {
    if (gencost->size() < gen->size()) {
      throw Error(ErrorKind::MalformedTable, "mpc.gencost has fewer rows than mpc.gen");
    }
    for (std::size_t r = 0; r < gencost->size(); ++r) {
      const auto& row = (*gencost)[r];
      if (row.size() < 4) throw Error(ErrorKind::MalformedTable, "mpc.gencost row too short");
      const int n = as_int(row[3]);
      if (row.size() < 4 + static_cast<std::size_t>(std::max(n, 0))) {
        throw Error(ErrorKind::MalformedTable,
                    "mpc.gencost row " + std::to_string(r + 1) + " declares " +
                        std::to_string(n) + " coefficients but has fewer");
      }
    }
  }

  for (std::size_t g = 0; g < gen->size(); ++g) {
    const auto& r = (*gen)[g];
    GenRow row;
    row.bus = as_int(r[0]);
    row.pg = r[1];
    row.qg = r[2];
    row.qmax = r[3];
    row.qmin = r[4];
    row.vg = r[5];
    row.mbase = r[6];
    row.status = as_int(r[7]);
    row.pmax = r[8];
    row.pmin = r[9];
    if (row.status <= 0 || isolated.count(row.bus)) continue;
    CostRow cost;
    if (gencost) {
      const auto& cr = (*gencost)[g];
      cost.model = as_int(cr[0]);
      cost.startup = cr[1];
      cost.shutdown = cr[2];
      const int n = as_int(cr[3]);
      if (cost.model != 2) {
        throw Error(ErrorKind::UnsupportedCost,
                    "generator " + std::to_string(g + 1) + " uses cost model " +
                        std::to_string(cost.model) + "; only polynomial (2) is supported");
      }
      if (n > 3) {
        throw Error(ErrorKind::UnsupportedCost,
                    "generator " + std::to_string(g + 1) + " has a polynomial of degree " +
                        std::to_string(n - 1) + "; at most quadratic is supported");
      }
      cost.coefficients.assign(cr.begin() + 4, cr.begin() + 4 + n);
    }
    c.generators.push_back(row);
    c.costs.push_back(std::move(cost));
  }

  for (const auto& r : *branch) {
    BranchRow row;
    row.from = as_int(r[0]);
    row.to = as_int(r[1]);
    row.r = r[2];
    row.x = r[3];
    row.b = r[4];
    row.rate_a = r[5];
    row.rate_b = r[6];
    row.rate_c = r[7];
    row.tap = r[8];
    row.shift = r[9];
    row.status = as_int(r[10]);
    if (r.size() >= 13) {
      row.angmin = r[11];
      row.angmax = r[12];
    }
    if (row.status <= 0 || isolated.count(row.from) || isolated.count(row.to)) continue;
    c.branches.push_back(row);
  }
  return c;
}

RawCase load_case(const std::string& path) {
  RawCase c = parse_case(read_text_file(path));
  if (c.name.empty()) {
    const auto slash = path.find_last_of('/');
    std::string stem = path.substr(slash == std::string::npos ? 0 : slash + 1);
    c.name = stem.substr(0, stem.find('.'));
  }
  return c;
}

void validate_case(const RawCase& c) {
  std::set<int> ids;
  int references = 0;
  for (const auto& b : c.buses) {
    ids.insert(b.id);
    if (b.type == kBusRef) ++references;
    if (b.vmax < 0.0 || b.vmin < 0.0) {
      throw Error(ErrorKind::InvalidCase, "bus " + std::to_string(b.id) + " has negative voltage limit");
    }
  }
  if (references != 1) {
    throw Error(ErrorKind::InvalidCase,
                "expected exactly one reference bus, found " + std::to_string(references));
  }
  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    const auto& br = c.branches[k];
    if (!ids.count(br.from) || !ids.count(br.to)) {
      throw Error(ErrorKind::MalformedTable, "branch " + std::to_string(k + 1) + " (" +
                                                 std::to_string(br.from) + "-" +
                                                 std::to_string(br.to) +
                                                 ") references a missing bus");
    }
    if (br.rate_a < 0.0) {
      throw Error(ErrorKind::InvalidCase, "branch " + std::to_string(k + 1) + " has negative rateA");
    }
  }
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    if (!ids.count(c.generators[g].bus)) {
      throw Error(ErrorKind::MalformedTable,
                  "generator " + std::to_string(g + 1) + " references a missing bus");
    }
  }
  if (!c.costs.empty() && c.costs.size() != c.generators.size()) {
    throw Error(ErrorKind::MalformedTable, "gencost and gen tables differ in length");
  }
}

std::string format_double(double value) {
  if (std::isnan(value)) return "NaN";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  if (value == std::floor(value) && std::fabs(value) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", value);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string write_case(const RawCase& c) {
  std::ostringstream out;
  const auto d = [](double v) { return format_double(v); };
  out << "function mpc = " << (c.name.empty() ? std::string("case") : c.name) << "\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = " << d(c.base_mva) << ";\n\n";
  out << "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\nmpc.bus = [\n";
  for (const auto& b : c.buses) {
    out << '\t' << b.id << '\t' << b.type << '\t' << d(b.pd) << '\t' << d(b.qd) << '\t'
        << d(b.gs) << '\t' << d(b.bs) << '\t' << b.area << '\t' << d(b.vm) << '\t' << d(b.va)
        << '\t' << d(b.base_kv) << '\t' << b.zone << '\t' << d(b.vmax) << '\t' << d(b.vmin)
        << ";\n";
  }
  out << "];\n\n%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin\nmpc.gen = [\n";
  for (const auto& g : c.generators) {
    out << '\t' << g.bus << '\t' << d(g.pg) << '\t' << d(g.qg) << '\t' << d(g.qmax) << '\t'
        << d(g.qmin) << '\t' << d(g.vg) << '\t' << d(g.mbase) << '\t' << g.status << '\t'
        << d(g.pmax) << '\t' << d(g.pmin) << ";\n";
  }
  out << "];\n\n%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax\n"
         "mpc.branch = [\n";
  for (const auto& br : c.branches) {
    out << '\t' << br.from << '\t' << br.to << '\t' << d(br.r) << '\t' << d(br.x) << '\t'
        << d(br.b) << '\t' << d(br.rate_a) << '\t' << d(br.rate_b) << '\t' << d(br.rate_c)
        << '\t' << d(br.tap) << '\t' << d(br.shift) << '\t' << br.status << '\t'
        << d(br.angmin) << '\t' << d(br.angmax) << ";\n";
  }
  out << "];\n";
  if (!c.costs.empty()) {
    out << "\n%% 2 startup shutdown n c(n-1) ... c0\nmpc.gencost = [\n";
    std::size_t width = 0;
    for (const auto& cost : c.costs) width = std::max(width, cost.coefficients.size());
    for (const auto& cost : c.costs) {
      out << '\t' << cost.model << '\t' << d(cost.startup) << '\t' << d(cost.shutdown) << '\t'
          << cost.coefficients.size();
      for (double v : cost.coefficients) out << '\t' << d(v);
      // Pad shorter polynomials so every row has the same arity.
      for (std::size_t k = cost.coefficients.size(); k < width; ++k) out << "\t0";
      out << ";\n";
    }
    out << "];\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Partitions

namespace {

std::map<int, std::vector<int>> adjacency(const RawCase& c) {
  std::map<int, std::vector<int>> adj;
  for (const auto& b : c.buses) adj[b.id];
  for (const auto& br : c.branches) {
    if (br.from == br.to) continue;
    adj[br.from].push_back(br.to);
    adj[br.to].push_back(br.from);
  }
  for (auto& [id, nbrs] : adj) {
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
  }
  return adj;
}

void check_partition(PartitionSpec& spec, const RawCase& c) {
  std::set<int> ids;
  for (const auto& b : c.buses) ids.insert(b.id);
  for (const auto& [bus, region] : spec.region_of_bus) {
    if (!ids.count(bus)) {
      throw Error(ErrorKind::UnknownBusId, "partition assigns unknown bus " + std::to_string(bus));
    }
    if (region < 1) {
      throw Error(ErrorKind::InvalidArgument, "region ids start at 1 (bus " + std::to_string(bus) + ")");
    }
  }
  for (int id : ids) {
    if (!spec.region_of_bus.count(id)) {
      throw Error(ErrorKind::UnassignedBus, "bus " + std::to_string(id) + " has no region");
    }
  }
  spec.region_count = 0;
  for (const auto& [bus, region] : spec.region_of_bus) {
    spec.region_count = std::max(spec.region_count, region);
  }
  std::vector<int> sizes(static_cast<std::size_t>(spec.region_count) + 1, 0);
  for (const auto& [bus, region] : spec.region_of_bus) ++sizes[static_cast<std::size_t>(region)];
  for (int r = 1; r <= spec.region_count; ++r) {
    if (sizes[static_cast<std::size_t>(r)] == 0) {
      throw Error(ErrorKind::EmptyRegion, "region " + std::to_string(r) + " has no buses");
    }
  }

  // Connectivity of each region's induced subgraph.
  const auto adj = adjacency(c);
  for (int r = 1; r <= spec.region_count; ++r) {
    std::vector<int> members;
    for (const auto& [bus, region] : spec.region_of_bus) {
      if (region == r) members.push_back(bus);
    }
    std::set<int> reached{members.front()};
    std::deque<int> queue{members.front()};
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v : adj.at(u)) {
        if (spec.region_of_bus.at(v) == r && reached.insert(v).second) queue.push_back(v);
      }
    }
    if (reached.size() != members.size()) {
      spec.warnings.push_back("region " + std::to_string(r) + " is not connected (" +
                              std::to_string(members.size() - reached.size()) +
                              " buses unreachable within the region)");
    }
  }
}

}  // namespace

PartitionSpec parse_partition(std::string_view text, const RawCase& c) {
  PartitionSpec spec;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    long long bus = 0;
    long long region = 0;
    if (!(fields >> bus)) continue;  // blank or comment-only
    std::string extra;
    if (!(fields >> region) || (fields >> extra)) {
      throw Error(ErrorKind::InvalidArgument,
                  "partition line " + std::to_string(line_no) + ": expected 'bus_id region_id'");
    }
    if (!spec.region_of_bus.emplace(static_cast<int>(bus), static_cast<int>(region)).second) {
      throw Error(ErrorKind::InvalidArgument,
                  "partition assigns bus " + std::to_string(bus) + " more than once");
    }
  }
  check_partition(spec, c);
  return spec;
}

PartitionSpec load_partition(const std::string& path, const RawCase& c) {
  return parse_partition(read_text_file(path), c);
}

std::string write_partition(const PartitionSpec& spec) {
  std::ostringstream out;
  out << "# bus_id region_id\n";
  for (const auto& [bus, region] : spec.region_of_bus) out << bus << ' ' << region << '\n';
  return out.str();
}

PartitionSpec fallback_partition(const RawCase& c, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > c.buses.size()) {
    throw Error(ErrorKind::InvalidArgument, "region count must be in 1..bus count");
  }
  const auto adj = adjacency(c);
  std::vector<std::pair<int, int>> by_degree;  // (-degree, id)
  for (const auto& [id, nbrs] : adj) by_degree.emplace_back(-static_cast<int>(nbrs.size()), id);
  std::sort(by_degree.begin(), by_degree.end());

  PartitionSpec spec;
  std::deque<int> queue;
  for (int r = 0; r < k; ++r) {
    const int seed = by_degree[static_cast<std::size_t>(r)].second;
    spec.region_of_bus[seed] = r + 1;
    queue.push_back(seed);
  }
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj.at(u)) {
      if (!spec.region_of_bus.count(v)) {
        spec.region_of_bus[v] = spec.region_of_bus[u];
        queue.push_back(v);
      }
    }
  }
  // Buses unreachable from every seed (separate islands) join region 1.
  for (const auto& [id, nbrs] : adj) spec.region_of_bus.emplace(id, 1);
  check_partition(spec, c);
  return spec;
}

// ---------------------------------------------------------------------------
// CSV and plot data

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw Error(ErrorKind::DimensionMismatch, "row has " + std::to_string(row.size()) +
                                                  " cells, table has " +
                                                  std::to_string(columns.size()) + " columns");
  }
  rows.push_back(std::move(row));
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string cell_text(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) {
    char buf[40];
    if (std::isnan(*d)) return "NaN";
    if (std::isinf(*d)) return *d > 0 ? "Inf" : "-Inf";
    std::snprintf(buf, sizeof(buf), "%.17g", *d);
    return buf;
  }
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  return std::get<std::string>(cell);
}

}  // namespace

std::string write_report(const Table& table) {
  std::string out;
  for (std::size_t k = 0; k < table.columns.size(); ++k) {
    if (k) out.push_back(',');
    out += csv_field(table.columns[k]);
  }
  out.push_back('\n');
  for (const auto& row : table.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out.push_back(',');
      out += csv_field(cell_text(row[k]));
    }
    out.push_back('\n');
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      field_started = true;
    } else if (ch == ',') {
      record.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (field_started || !field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      record.clear();
      field.clear();
      field_started = false;
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (field_started || !field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string write_plot_data(const std::vector<PlotSeries>& series) {
  std::string out;
  for (std::size_t s = 0; s < series.size(); ++s) {
    if (s) out += "\n\n";
    out += "# " + series[s].name + "\n";
    const std::size_t n = std::min(series[s].x.size(), series[s].y.size());
    for (std::size_t i = 0; i < n; ++i) {
      out += cell_text(series[s].x[i]) + ' ' + cell_text(series[s].y[i]) + '\n';
    }
  }
  return out;
}

void write_text_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dopf

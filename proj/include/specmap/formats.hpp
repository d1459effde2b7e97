#pragma once

/**
 * Line-oriented text formats.
 *
 * Every file starts with a version line `#specmap <kind> v1`. Optional
 * `key=value` property lines follow, then one CSV header line naming the
 * columns, then one record per line. Blank lines and lines starting with `#`
 * are ignored after the version line. Columns are matched by name, so their
 * order is free on input; writers emit the canonical order below.
 *
 *   platform   partition_count=<m>; unit_id,kind,resource_count
 *   profiles   model_role,unit_id,allocation,quantization,seq_len,latency_ms
 *   traces     task,sample_id,config,drafted,accepted
 *   plan       variant_index,allocation,use_speculation,gamma,mapping,
 *              heterogeneous,predicted_speedup,notes,cost_coefficient
 *   sweep      alpha,gamma,c,predicted,measured,stderr
 *
 * Markov models use a bare numeric grid: `#specmap markov v1`, then one
 * whitespace-separated row per state.
 */

#include "specmap/acceptance.hpp"
#include "specmap/design_space.hpp"
#include "specmap/errors.hpp"
#include "specmap/planner.hpp"
#include "specmap/profiles.hpp"
#include "specmap/simulator.hpp"
#include "specmap/toy_models.hpp"

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace specmap {

inline constexpr std::string_view kFormatVersion = "v1";

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_csv(std::string_view line, const std::string &source, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"' && trim(field).empty()) {
      field.clear();
      quoted = was_quoted = true;
    } else if (ch == ',') {
      fields.push_back(was_quoted ? field : std::string(trim(field)));
      field.clear();
      was_quoted = false;
    } else {
      field += ch;
    }
  }
  if (quoted)
    throw FormatError(source, line_no, "unterminated quoted field");
  fields.push_back(was_quoted ? field : std::string(trim(field)));
  return fields;
}

inline std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos)
    return std::string(text);
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"')
      out += '"';
    out += ch;
  }
  return out + "\"";
}

template <typename T> T parse_unsigned(std::string_view text, const std::string &source, std::size_t line,
                                       std::string_view field) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size())
    throw FormatError(source, line, "field '" + std::string(field) + "': expected a non-negative integer, got '" +
                                        std::string(text) + "'");
  return value;
}

inline double parse_real(std::string_view text, const std::string &source, std::size_t line,
                         std::string_view field) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
    throw FormatError(source, line, "field '" + std::string(field) + "': expected a finite number, got '" +
                                        std::string(text) + "'");
  return value;
}

/// Parses "a;b;c" into unsigned integers.
template <typename T> std::vector<T> parse_index_list(std::string_view text, const std::string &source,
                                                      std::size_t line, std::string_view field) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(';', start), text.size());
    out.push_back(parse_unsigned<T>(trim(text.substr(start, end - start)), source, line, field));
    start = end + 1;
  }
  return out;
}

struct Row {
  std::size_t line = 0;
  std::map<std::string, std::string, std::less<>> fields;

  const std::string &get(std::string_view name) const { return fields.find(name)->second; }
};

struct Table {
  std::map<std::string, std::string, std::less<>> properties;
  std::map<std::string, std::size_t, std::less<>> property_lines;
  std::vector<Row> rows;
};

/// Reads version line, properties, header and rows; checks required columns.
inline Table read_table(std::istream &in, const std::string &source, std::string_view kind,
                        const std::vector<std::string_view> &required) {
  Table table;
  std::string raw;
  std::size_t line_no = 0;
  bool version_seen = false;
  std::vector<std::string> columns;
  const std::string expected = "#specmap " + std::string(kind) + " " + std::string(kFormatVersion);
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (!version_seen) {
      if (line.empty())
        continue;
      if (line != expected)
        throw FormatError(source, line_no, "expected version line '" + expected + "'");
      version_seen = true;
      continue;
    }
    if (line.empty() || line.front() == '#')
      continue;
    if (columns.empty()) {
      const auto eq = line.find('=');
      if (eq != std::string_view::npos && line.find(',') == std::string_view::npos) {
        const std::string key(trim(line.substr(0, eq)));
        table.properties[key] = std::string(trim(line.substr(eq + 1)));
        table.property_lines[key] = line_no;
        continue;
      }
      columns = split_csv(line, source, line_no);
      for (auto name : required)
        if (std::find(columns.begin(), columns.end(), name) == columns.end())
          throw FormatError(source, line_no, "missing column '" + std::string(name) + "'");
      continue;
    }
    auto values = split_csv(line, source, line_no);
    if (values.size() != columns.size())
      throw FormatError(source, line_no,
                        "expected " + std::to_string(columns.size()) + " fields, got " + std::to_string(values.size()));
    Row row{line_no, {}};
    for (std::size_t i = 0; i < columns.size(); ++i)
      row.fields[columns[i]] = std::move(values[i]);
    table.rows.push_back(std::move(row));
  }
  if (!version_seen)
    throw FormatError(source, line_no == 0 ? 1 : line_no, "no records (missing version line '" + expected + "')");
  return table;
}

/// Re-throws library validation failures with a file location.
template <typename F> auto at_line(const std::string &source, std::size_t line, F &&f) {
  try {
    return f();
  } catch (const FormatError &) {
    throw;
  } catch (const InputError &e) {
    throw FormatError(source, line, e.what());
  }
}

inline std::ifstream open_input(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw InputError("cannot open '" + path.string() + "'");
  return in;
}

} // namespace detail

// ---------------------------------------------------------------------------
// platform

inline Platform read_platform(std::istream &in, const std::string &source = "<platform>") {
  const auto table = detail::read_table(in, source, "platform", {"unit_id", "kind", "resource_count"});
  auto it = table.properties.find("partition_count");
  if (it == table.properties.end())
    throw FormatError(source, 1, "missing 'partition_count=<m>' line");
  const auto m = detail::parse_unsigned<std::uint32_t>(it->second, source, table.property_lines.at("partition_count"),
                                                       "partition_count");
  std::vector<ProcessingUnit> units;
  for (const auto &row : table.rows) {
    units.push_back(detail::at_line(source, row.line, [&] {
      return ProcessingUnit{row.get("unit_id"), parse_unit_kind(row.get("kind")),
                            detail::parse_unsigned<std::uint32_t>(row.get("resource_count"), source, row.line,
                                                                  "resource_count")};
    }));
  }
  if (units.empty())
    throw InputError(source + ": no records");
  return Platform{std::move(units), m};
}

inline void write_platform(std::ostream &out, const Platform &platform) {
  out << "#specmap platform " << kFormatVersion << "\n";
  out << "partition_count=" << platform.partition_count() << "\n";
  out << "unit_id,kind,resource_count\n";
  for (const auto &u : platform.units())
    out << detail::csv_field(u.id) << "," << to_string(u.kind) << "," << u.resource_count << "\n";
}

// ---------------------------------------------------------------------------
// profiles

inline std::vector<ProfileRecord> read_profile_records(std::istream &in, const std::string &source = "<profiles>") {
  const auto table = detail::read_table(
      in, source, "profiles", {"model_role", "unit_id", "allocation", "quantization", "seq_len", "latency_ms"});
  std::vector<ProfileRecord> records;
  for (const auto &row : table.rows) {
    records.push_back(detail::at_line(source, row.line, [&] {
      ProfileRecord r;
      r.line = row.line;
      r.key.role = parse_model_role(row.get("model_role"));
      r.key.unit_id = row.get("unit_id");
      if (r.key.unit_id.empty())
        throw InputError("unit_id must not be empty");
      r.key.allocation = detail::parse_unsigned<std::uint32_t>(row.get("allocation"), source, row.line, "allocation");
      if (r.key.allocation < 1)
        throw InputError("allocation must be at least 1");
      r.key.quantization = parse_quantization(row.get("quantization"));
      r.sample.seq_len = detail::parse_unsigned<std::uint32_t>(row.get("seq_len"), source, row.line, "seq_len");
      if (r.sample.seq_len < 1)
        throw InputError("seq_len must be at least 1");
      r.sample.latency_ms = detail::parse_real(row.get("latency_ms"), source, row.line, "latency_ms");
      if (r.sample.latency_ms <= 0.0)
        throw InputError("latency_ms must be positive, got " + row.get("latency_ms"));
      return r;
    }));
  }
  if (records.empty())
    throw InputError(source + ": no records");
  return records;
}

inline void write_profile_records(std::ostream &out, const ProfileStore &store) {
  out << "#specmap profiles " << kFormatVersion << "\n";
  out << "model_role,unit_id,allocation,quantization,seq_len,latency_ms\n";
  for (const auto &[key, profile] : store.profiles())
    for (const auto &s : profile.samples())
      out << to_string(key.role) << "," << detail::csv_field(key.unit_id) << "," << key.allocation << ","
          << to_string(key.quantization) << "," << s.seq_len << "," << format_double(s.latency_ms) << "\n";
}

// ---------------------------------------------------------------------------
// traces

inline std::vector<AcceptanceTrace> read_traces(std::istream &in, const std::string &source = "<traces>") {
  const auto table = detail::read_table(in, source, "traces", {"task", "sample_id", "config", "drafted", "accepted"});
  std::vector<AcceptanceTrace> traces;
  for (const auto &row : table.rows) {
    traces.push_back(detail::at_line(source, row.line, [&] {
      return AcceptanceTrace{row.get("task"), row.get("sample_id"), row.get("config"),
                             detail::parse_unsigned<std::uint64_t>(row.get("drafted"), source, row.line, "drafted"),
                             detail::parse_unsigned<std::uint64_t>(row.get("accepted"), source, row.line, "accepted")};
    }));
  }
  if (traces.empty())
    throw InputError(source + ": no records");
  return traces;
}

inline void write_traces(std::ostream &out, std::span<const AcceptanceTrace> traces) {
  out << "#specmap traces " << kFormatVersion << "\n";
  out << "task,sample_id,config,drafted,accepted\n";
  for (const auto &t : traces)
    out << detail::csv_field(t.task()) << "," << detail::csv_field(t.sample_id()) << ","
        << detail::csv_field(t.config()) << "," << t.drafted() << "," << t.accepted() << "\n";
}

// ---------------------------------------------------------------------------
// plan records

inline constexpr std::string_view kNoteSeparator = " | ";

inline void write_plan(std::ostream &out, std::span<const PlanDecision> decisions) {
  out << "#specmap plan " << kFormatVersion << "\n";
  out << "variant_index,allocation,use_speculation,gamma,mapping,heterogeneous,predicted_speedup,notes,"
         "cost_coefficient\n";
  for (const auto &d : decisions) {
    std::string notes;
    for (std::size_t i = 0; i < d.notes.size(); ++i)
      notes += (i ? std::string(kNoteSeparator) : std::string{}) + d.notes[i];
    out << d.variant_index << "," << join_indices(d.variant.allocation) << ","
        << (d.use_speculation ? "yes" : "no") << "," << d.gamma.value << ","
        << (d.mapping ? join_indices(d.mapping->assignment) : std::string{}) << ","
        << (!d.heterogeneous ? "na" : (*d.heterogeneous ? "yes" : "no")) << ","
        << format_double(d.predicted_speedup.value()) << "," << detail::csv_field(notes) << ","
        << (d.cost_coefficient ? format_double(d.cost_coefficient->value()) : std::string{}) << "\n";
  }
}

inline std::vector<PlanDecision> read_plan(std::istream &in, const std::string &source = "<plan>") {
  const auto table = detail::read_table(in, source, "plan",
                                        {"variant_index", "allocation", "use_speculation", "gamma", "mapping",
                                         "heterogeneous", "predicted_speedup", "notes"});
  std::vector<PlanDecision> decisions;
  for (const auto &row : table.rows) {
    decisions.push_back(detail::at_line(source, row.line, [&] {
      auto yes_no = [&](std::string_view field) {
        const auto &v = row.get(field);
        if (v == "yes") return true;
        if (v == "no") return false;
        throw InputError("field '" + std::string(field) + "': expected yes or no, got '" + v + "'");
      };
      PlanDecision d;
      d.variant_index = detail::parse_unsigned<std::size_t>(row.get("variant_index"), source, row.line, "variant_index");
      d.variant.allocation = detail::parse_index_list<std::uint32_t>(row.get("allocation"), source, row.line, "allocation");
      d.use_speculation = yes_no("use_speculation");
      d.gamma.value = detail::parse_unsigned<std::uint32_t>(row.get("gamma"), source, row.line, "gamma");
      if (!row.get("mapping").empty())
        d.mapping = Mapping{detail::parse_index_list<std::size_t>(row.get("mapping"), source, row.line, "mapping")};
      if (row.get("heterogeneous") != "na")
        d.heterogeneous = yes_no("heterogeneous");
      d.predicted_speedup =
          Speedup{detail::parse_real(row.get("predicted_speedup"), source, row.line, "predicted_speedup")};
      const std::string &notes = row.get("notes");
      for (std::size_t start = 0; !notes.empty() && start <= notes.size();) {
        const std::size_t end = std::min(notes.find(kNoteSeparator, start), notes.size());
        d.notes.push_back(notes.substr(start, end - start));
        start = end + kNoteSeparator.size();
      }
      auto c = row.fields.find("cost_coefficient");
      if (c != row.fields.end() && !c->second.empty())
        d.cost_coefficient = CostCoefficient{detail::parse_real(c->second, source, row.line, "cost_coefficient")};
      if (!d.use_speculation && (d.gamma.value != 0 || d.predicted_speedup.value() != 1.0))
        throw InputError("a no-speculation record must have gamma 0 and speedup 1");
      return d;
    }));
  }
  return decisions;
}

// ---------------------------------------------------------------------------
// simulation output

inline void write_sweep(std::ostream &out, std::span<const SweepCell> cells) {
  out << "#specmap sweep " << kFormatVersion << "\n";
  out << "alpha,gamma,c,predicted,measured,stderr\n";
  for (const auto &cell : cells)
    out << format_double(cell.alpha) << "," << cell.gamma << "," << format_double(cell.c) << ","
        << format_double(cell.predicted) << "," << format_double(cell.measured) << ","
        << (cell.standard_error ? format_double(*cell.standard_error) : std::string("NA")) << "\n";
}

inline std::vector<SweepCell> read_sweep(std::istream &in, const std::string &source = "<sweep>") {
  const auto table =
      detail::read_table(in, source, "sweep", {"alpha", "gamma", "c", "predicted", "measured", "stderr"});
  std::vector<SweepCell> cells;
  for (const auto &row : table.rows) {
    SweepCell cell;
    cell.alpha = detail::parse_real(row.get("alpha"), source, row.line, "alpha");
    cell.gamma = detail::parse_unsigned<std::uint32_t>(row.get("gamma"), source, row.line, "gamma");
    cell.c = detail::parse_real(row.get("c"), source, row.line, "c");
    cell.predicted = detail::parse_real(row.get("predicted"), source, row.line, "predicted");
    cell.measured = detail::parse_real(row.get("measured"), source, row.line, "measured");
    if (row.get("stderr") != "NA")
      cell.standard_error = detail::parse_real(row.get("stderr"), source, row.line, "stderr");
    cells.push_back(cell);
  }
  return cells;
}

inline void write_alpha_samples(std::ostream &out, const AlphaDistribution &dist) {
  out << "#specmap alpha-samples " << kFormatVersion << "\n";
  out << "config=" << dist.config << "\n";
  if (dist.task_filter)
    out << "task_filter=" << *dist.task_filter << "\n";
  out << "task,sample_id,alpha\n";
  for (const auto &s : dist.samples)
    out << detail::csv_field(s.task) << "," << detail::csv_field(s.sample_id) << "," << format_double(s.alpha)
        << "\n";
}

inline void write_cost_curves(std::ostream &out, std::span<const CostCurve> curves,
                              const std::vector<DesignVariant> &variants) {
  out << "#specmap cost-curves " << kFormatVersion << "\n";
  out << "variant_index,allocation,mapping,heterogeneous,seq_len,draft_ms,target_ms,c,infeasible\n";
  for (const auto &curve : curves) {
    const auto pos = std::find(variants.begin(), variants.end(), curve.variant());
    const std::size_t vi = static_cast<std::size_t>(pos - variants.begin()) + 1;
    for (const auto &p : curve.points())
      out << vi << "," << join_indices(curve.variant().allocation) << "," << join_indices(curve.mapping().assignment)
          << "," << (curve.mapping().heterogeneous() ? "yes" : "no") << "," << p.seq_len << ","
          << format_double(p.draft_ms) << "," << format_double(p.target_ms) << "," << format_double(p.c.value())
          << "," << (p.infeasible() ? "yes" : "no") << "\n";
  }
}

// ---------------------------------------------------------------------------
// Markov grid

inline MarkovModel read_markov(std::istream &in, const std::string &source = "<markov>") {
  std::string raw;
  std::size_t line_no = 0;
  bool version_seen = false;
  const std::string expected = "#specmap markov " + std::string(kFormatVersion);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (!version_seen) {
      if (line.empty())
        continue;
      if (line != expected)
        throw FormatError(source, line_no, "expected version line '" + expected + "'");
      version_seen = true;
      continue;
    }
    if (line.empty() || line.front() == '#')
      continue;
    std::istringstream cells{std::string(line)};
    std::string cell;
    std::vector<double> row;
    while (cells >> cell)
      row.push_back(detail::parse_real(cell, source, line_no, "probability"));
    rows.push_back(std::move(row));
  }
  if (!version_seen || rows.empty())
    throw InputError(source + ": no records");
  return detail::at_line(source, line_no, [&] { return MarkovModel{std::move(rows)}; });
}

inline void write_markov(std::ostream &out, const MarkovModel &model) {
  out << "#specmap markov " << kFormatVersion << "\n";
  for (const auto &row : model.rows()) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? " " : "") << format_double(row[i]);
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// path helpers

inline Platform load_platform(const std::filesystem::path &path) {
  auto in = detail::open_input(path);
  return read_platform(in, path.string());
}

inline ProfileStore load_profiles(const std::filesystem::path &path) {
  auto in = detail::open_input(path);
  return ProfileStore::from_records(read_profile_records(in, path.string()));
}

inline std::vector<AcceptanceTrace> load_traces(const std::filesystem::path &path) {
  auto in = detail::open_input(path);
  return read_traces(in, path.string());
}

inline MarkovModel load_markov(const std::filesystem::path &path) {
  auto in = detail::open_input(path);
  return read_markov(in, path.string());
}

} // namespace specmap

// Copyright 2026 The CLoRA Lab Authors
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

#include "clora/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <istream>
#include <iterator>
#include <ostream>
#include <stdexcept>

namespace clora {

std::string format_number(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_field(std::string_view field, std::size_t line_no) {
  T value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw std::runtime_error("measure csv: line " + std::to_string(line_no) + ": bad number '" +
                             std::string(field) + "'");
  return value;
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<MeasureRow> measure_rows(const MetricsRecord& record, const RunLabel& label) {
  auto row = [&](std::string method, std::string target, double capacity, double forgetting) {
    return MeasureRow{std::move(method), std::move(target), label.k, label.rank, label.lambda, label.seed,
                      capacity, forgetting};
  };
  std::vector<MeasureRow> rows;
  for (const auto& [site, m] : record.per_adapter) rows.push_back(row(label.method, site, m.capacity, m.forgetting));
  rows.push_back(row(label.method, std::string(kAllTargets), record.model_capacity, record.model_forgetting));
  rows.push_back(row(std::string(kReferenceMethod), std::string(kAllTargets), record.reference_capacity,
                     record.reference_forgetting));
  return rows;
}

void write_measure_csv(std::ostream& out, std::span<const MeasureRow> rows) {
  out << kMeasureHeader << '\n';
  for (const auto& r : rows) {
    out << r.method << ',' << r.target << ',' << r.k << ',' << r.rank << ',' << format_number(r.lambda) << ','
        << r.seed << ',' << format_number(r.capacity) << ',' << format_number(r.forgetting) << '\n';
  }
}

std::vector<MeasureRow> read_measure_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kMeasureHeader)
    throw std::runtime_error("measure csv: expected header '" + std::string(kMeasureHeader) + "'");
  std::vector<MeasureRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = strip_cr(line);
    if (text.empty()) continue;
    const auto f = split(text);
    if (f.size() != 8)
      throw std::runtime_error("measure csv: line " + std::to_string(line_no) + ": expected 8 fields");
    MeasureRow r;
    r.method = std::string(f[0]);
    r.target = std::string(f[1]);
    r.k = parse_field<std::size_t>(f[2], line_no);
    r.rank = parse_field<std::size_t>(f[3], line_no);
    r.lambda = parse_field<double>(f[4], line_no);
    r.seed = parse_field<std::uint64_t>(f[5], line_no);
    r.capacity = parse_field<double>(f[6], line_no);
    r.forgetting = parse_field<double>(f[7], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_continual_csv(std::ostream& out, const CLReport& report) {
  out << kContinualHeader << '\n';
  for (std::size_t i = 0; i < report.acc.size(); ++i)
    for (std::size_t j = 0; j < report.acc[i].size(); ++j)
      out << i + 1 << ',' << j + 1 << ',' << format_number(report.acc[i][j]) << '\n';
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << kSweepHeader << '\n';
  for (const auto& r : rows)
    out << r.k << ',' << r.capacities.size() << ',' << format_number(r.capacity) << ','
        << format_number(r.forgetting) << '\n';
}

std::vector<SummaryRow> summarize(std::span<const MeasureRow> rows) {
  std::vector<SummaryRow> out;
  for (const auto& r : rows) {
    if (r.target != kAllTargets) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const SummaryRow& s) {
      return s.method == r.method && s.k == r.k && s.rank == r.rank && s.lambda == r.lambda;
    });
    if (it == out.end()) {
      out.push_back(SummaryRow{r.method, r.k, r.rank, r.lambda, 0, 0.0, 0.0});
      it = std::prev(out.end());
    }
    ++it->runs;
    it->capacity += r.capacity;
    it->forgetting += r.forgetting;
  }
  for (auto& s : out) {
    s.capacity /= static_cast<double>(s.runs);
    s.forgetting /= static_cast<double>(s.runs);
  }
  return out;
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << kSummaryHeader << '\n';
  for (const auto& r : rows)
    out << r.method << ',' << r.k << ',' << r.rank << ',' << format_number(r.lambda) << ',' << r.runs << ','
        << format_number(r.capacity) << ',' << format_number(r.forgetting) << '\n';
}

std::string format_summary_table(std::span<const SummaryRow> rows) {
  std::string out;
  std::array<char, 160> buf;
  std::snprintf(buf.data(), buf.size(), "%-10s %6s %5s %8s %5s %10s %10s\n", "method", "k", "rank", "lambda", "runs",
                "capacity", "F");
  out += buf.data();
  for (const auto& r : rows) {
    // %g and %f follow LC_NUMERIC; the CLI never calls setlocale, so this is
    // the "C" locale. CSV output goes through format_number instead.
    std::snprintf(buf.data(), buf.size(), "%-10s %6zu %5zu %8s %5zu %10.4f %10.4f\n", r.method.c_str(), r.k, r.rank,
                  format_number(r.lambda).c_str(), r.runs, r.capacity, r.forgetting);
    out += buf.data();
  }
  return out;
}

}  // namespace clora

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

// CSV reports. Numbers are written with std::to_chars (shortest round-trip
// form, '.' decimal separator) so output does not depend on the C locale.
//
//   measure    method,target,k,rank,lambda,seed,capacity,forgetting
//              one row per adapter site, a target=all row with the model
//              means, and a method=reference row computed from W
//   continual  stage,task,accuracy          (1-based stage and task)
//   sweep      k,seeds,capacity,forgetting  (seed means; k=0 is plain LoRA)
//   summary    method,k,rank,lambda,runs,capacity,forgetting
//
// The lambda column holds the penalty weight of the method: CLoRA's lambda,
// LoRA-L2's l2_reg_weight, 0 for plain LoRA.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clora/metrics.hpp"
#include "clora/trainer.hpp"

namespace clora {

inline constexpr std::string_view kMeasureHeader = "method,target,k,rank,lambda,seed,capacity,forgetting";
inline constexpr std::string_view kContinualHeader = "stage,task,accuracy";
inline constexpr std::string_view kSweepHeader = "k,seeds,capacity,forgetting";
inline constexpr std::string_view kSummaryHeader = "method,k,rank,lambda,runs,capacity,forgetting";
inline constexpr std::string_view kAllTargets = "all";
inline constexpr std::string_view kReferenceMethod = "reference";

/// Shortest decimal form that parses back to the same double.
std::string format_number(double v);

struct RunLabel {
  std::string method;
  std::size_t k = 0;
  std::size_t rank = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

struct MeasureRow {
  std::string method;
  std::string target;
  std::size_t k = 0;
  std::size_t rank = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double capacity = 0.0;
  double forgetting = 0.0;

  friend bool operator==(const MeasureRow&, const MeasureRow&) = default;
};

/// Per-site rows, the aggregate row and the reference row. Absent sites are
/// left out.
std::vector<MeasureRow> measure_rows(const MetricsRecord& record, const RunLabel& label);

void write_measure_csv(std::ostream& out, std::span<const MeasureRow> rows);
/// Throws std::runtime_error on a wrong header or a malformed row.
std::vector<MeasureRow> read_measure_csv(std::istream& in);

void write_continual_csv(std::ostream& out, const CLReport& report);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

struct SummaryRow {
  std::string method;
  std::size_t k = 0;
  std::size_t rank = 0;
  double lambda = 0.0;
  std::size_t runs = 0;
  double capacity = 0.0;
  double forgetting = 0.0;
};

/// Averages the aggregate (target=all) rows over seeds, grouped by
/// (method, k, rank, lambda) in order of first appearance.
std::vector<SummaryRow> summarize(std::span<const MeasureRow> rows);
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);
/// Fixed-width text rendering of the summary for terminals.
std::string format_summary_table(std::span<const SummaryRow> rows);

}  // namespace clora

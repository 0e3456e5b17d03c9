// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

// Forget quality versus model utility across runs: an SVG scatter with one
// polyline per run (epochs in order) and a markdown summary table.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tiflab::cli {

struct RunCsv {
  std::string label;
  std::vector<std::string> columns;
  // One map per row, column name -> value. `checkpoint` is kept as text in
  // `checkpoints`.
  std::vector<std::map<std::string, double>> rows;
  std::vector<std::string> checkpoints;

  // Row with the highest forget quality; ties go to the earliest epoch.
  std::size_t peak_row() const;
};

// Throws SchemaError for a missing column or a non-numeric cell.
RunCsv parse_run_csv(const std::string& text, std::string label);
RunCsv read_run_csv(const std::filesystem::path& path, std::string label = {});

std::string tradeoff_svg(const std::vector<RunCsv>& runs);
std::string summary_markdown(const std::vector<RunCsv>& runs);

struct ReportFiles {
  std::filesystem::path svg;
  std::filesystem::path summary;
};

// Inputs are "path" or "label=path". Writes report-H.svg and summary-H.md,
// H hashing labels and file contents.
ReportFiles write_report(const std::vector<std::string>& inputs, const std::filesystem::path& out_dir);

}  // namespace tiflab::cli

// Copyright 2026 The tiflab Authors
// SPDX-License-Identifier: Apache-2.0

#include "tiflab/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tiflab/engine.hpp"
#include "tiflab/errors.hpp"

namespace tiflab::cli {
namespace {

namespace fs = std::filesystem;

const char* const kRequired[] = {"epoch", "forget_quality", "model_utility"};
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

// Plot area in SVG units.
constexpr double kWidth = 640, kHeight = 420, kLeft = 70, kRight = 170, kTop = 30, kBottom = 50;
// Forget quality axis spans 10^kMinDecade .. 1.
constexpr int kMinDecade = -12;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double px(double mu, double mu_max) { return kLeft + (kWidth - kLeft - kRight) * mu / mu_max; }

double py(double fq) {
  const double lg = std::clamp(std::log10(std::max(fq, 1e-300)), static_cast<double>(kMinDecade), 0.0);
  return kTop + (kHeight - kTop - kBottom) * (lg / kMinDecade);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PrerequisiteError("cannot read " + path.string() + "; run `tiflab evaluate` first");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double value_or(const std::map<std::string, double>& row, const std::string& key) {
  auto it = row.find(key);
  return it == row.end() ? std::nan("") : it->second;
}

}  // namespace

std::size_t RunCsv::peak_row() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].at("forget_quality") > rows[best].at("forget_quality")) best = i;
  }
  return best;
}

RunCsv parse_run_csv(const std::string& text, std::string label) {
  RunCsv run;
  run.label = std::move(label);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(run.label + ": empty CSV");
  run.columns = split_csv_line(line);
  for (const char* name : kRequired) {
    if (std::find(run.columns.begin(), run.columns.end(), name) == run.columns.end()) {
      throw SchemaError(run.label + ": missing column " + name);
    }
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != run.columns.size()) {
      throw SchemaError(run.label + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                        " cells, expected " + std::to_string(run.columns.size()));
    }
    std::map<std::string, double> row;
    std::string checkpoint;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (run.columns[i] == "checkpoint") {
        checkpoint = cells[i];
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(cells[i].c_str(), &end);
      if (cells[i].empty() || end != cells[i].c_str() + cells[i].size()) {
        throw SchemaError(run.label + ": line " + std::to_string(line_no) + ", column " + run.columns[i] +
                          " is not a number");
      }
      row[run.columns[i]] = v;
    }
    run.rows.push_back(std::move(row));
    run.checkpoints.push_back(std::move(checkpoint));
  }
  if (run.rows.empty()) throw SchemaError(run.label + ": no rows");
  return run;
}

RunCsv read_run_csv(const fs::path& path, std::string label) {
  return parse_run_csv(read_text(path), label.empty() ? path.stem().string() : std::move(label));
}

std::string tradeoff_svg(const std::vector<RunCsv>& runs) {
  double mu_max = 0.0;
  for (const auto& r : runs) {
    for (const auto& row : r.rows) mu_max = std::max(mu_max, row.at("model_utility"));
  }
  mu_max = std::max(0.1, std::ceil(mu_max * 10.0) / 10.0);

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kTop, y1 = kHeight - kBottom;
  s << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << x1 - x0 << "\" height=\"" << y1 - y0
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int d = 0; d >= kMinDecade; d -= 2) {
    const double y = py(std::pow(10.0, d));
    s << "<line x1=\"" << x0 << "\" y1=\"" << fixed(y, 1) << "\" x2=\"" << x1 << "\" y2=\"" << fixed(y, 1)
      << "\" stroke=\"#ddd\"/>\n";
    s << "<text x=\"" << x0 - 6 << "\" y=\"" << fixed(y + 4, 1) << "\" text-anchor=\"end\">1e" << d << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double mu = mu_max * i / 5.0;
    const double x = px(mu, mu_max);
    s << "<text x=\"" << fixed(x, 1) << "\" y=\"" << y1 + 16 << "\" text-anchor=\"middle\">" << fixed(mu, 2)
      << "</text>\n";
  }
  s << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">Model utility</text>\n";
  s << "<text x=\"16\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (y0 + y1) / 2 << ")\">Forget quality (KS p-value)</text>\n";
  const double y05 = py(0.05);
  s << "<line x1=\"" << x0 << "\" y1=\"" << fixed(y05, 1) << "\" x2=\"" << x1 << "\" y2=\"" << fixed(y05, 1)
    << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";

  for (std::size_t r = 0; r < runs.size(); ++r) {
    const char* color = kPalette[r % std::size(kPalette)];
    std::string points;
    for (const auto& row : runs[r].rows) {
      points += fixed(px(row.at("model_utility"), mu_max), 1) + "," + fixed(py(row.at("forget_quality")), 1) + " ";
    }
    if (!points.empty()) points.pop_back();
    s << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << color << "\"/>\n";
    for (const auto& row : runs[r].rows) {
      s << "<circle cx=\"" << fixed(px(row.at("model_utility"), mu_max), 1) << "\" cy=\""
        << fixed(py(row.at("forget_quality")), 1) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    const double ly = y0 + 14 + 16.0 * static_cast<double>(r);
    s << "<rect x=\"" << x1 + 12 << "\" y=\"" << ly - 8 << "\" width=\"10\" height=\"10\" fill=\"" << color
      << "\"/>\n";
    s << "<text x=\"" << x1 + 28 << "\" y=\"" << ly + 1 << "\">" << escape(runs[r].label) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string summary_markdown(const std::vector<RunCsv>& runs) {
  std::ostringstream s;
  s << "| run | epochs | peak FQ epoch | peak FQ | MU at peak | MU epoch 0 | final GW CE | final retain KL | final "
       "PrivLeak |\n";
  s << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : runs) {
    const auto& peak = r.rows[r.peak_row()];
    const auto& first = r.rows.front();
    const auto& last = r.rows.back();
    s << "| " << r.label << " | " << r.rows.size() << " | " << static_cast<long long>(peak.at("epoch")) << " | "
      << sci(peak.at("forget_quality")) << " | " << fixed(peak.at("model_utility"), 4) << " | "
      << fixed(first.at("model_utility"), 4) << " | " << fixed(value_or(last, "gw_ce"), 4) << " | "
      << fixed(value_or(last, "kl_retain"), 4) << " | " << fixed(value_or(last, "privleak"), 2) << " |\n";
  }
  return s.str();
}

ReportFiles write_report(const std::vector<std::string>& inputs, const fs::path& out_dir) {
  if (inputs.empty()) throw ConfigError("report needs at least one run CSV", "/report/inputs");
  std::vector<RunCsv> runs;
  std::string fingerprint;
  for (const auto& input : inputs) {
    const auto eq = input.find('=');
    const std::string label = eq == std::string::npos ? std::string() : input.substr(0, eq);
    const fs::path path = eq == std::string::npos ? fs::path(input) : fs::path(input.substr(eq + 1));
    const std::string text = read_text(path);
    runs.push_back(parse_run_csv(text, label.empty() ? path.stem().string() : label));
    fingerprint += runs.back().label + "\n" + text + "\n";
  }
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(engine::fnv1a(fingerprint)));
  fs::create_directories(out_dir);
  ReportFiles files{out_dir / (std::string("report-") + hash + ".svg"),
                    out_dir / (std::string("summary-") + hash + ".md")};
  std::ofstream(files.svg, std::ios::binary) << tradeoff_svg(runs);
  std::ofstream(files.summary, std::ios::binary) << "# Forget quality vs model utility\n\n" << summary_markdown(runs);
  if (!fs::exists(files.svg) || !fs::exists(files.summary)) throw Error("failed writing report to " + out_dir.string());
  return files;
}

}  // namespace tiflab::cli

#include "prmgui/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "prmgui/error.hpp"

namespace prmgui::report {

namespace fs = std::filesystem;

const std::vector<std::pair<std::string, std::vector<std::string>>>& known_schemas() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> schemas{
      {"ppo", {"iteration", "success_rate", "mean_reward", "policy_loss", "value_loss"}},
      {"grpo-trajectory", {"iteration", "mean_reward", "loss", "kl"}},
      {"grpo-offline", {"step", "mean_reward", "loss", "kl", "type_match", "exact_match"}},
      {"prm-training", {"epoch", "train_loss"}},
      {"sweep", {"n", "success_rate", "ci_low", "ci_high", "ms_per_step", "episodes"}},
      {"ablation", {"annotator", "accuracy", "seed", "prm_accuracy", "success_rate"}},
      {"benchmark", {"scope", "episodes", "successes", "success_rate", "ci_low", "ci_high"}},
      {"arms", {"arm", "seed", "success_rate"}},
  };
  return schemas;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double num(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  return (end && *end == '\0' && !s.empty()) ? v : std::nan("");
}

std::string fmt(double v, const char* f = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

Table read_table(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot read " + csv.string());
  const std::string file = csv.filename().string();
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw SchemaError(file, "", "missing header");
  const auto header = split_csv(line);

  // Closest schema by shared leading columns; report where it diverges.
  const std::pair<std::string, std::vector<std::string>>* best = nullptr;
  std::size_t best_prefix = 0;
  for (const auto& s : known_schemas()) {
    std::size_t k = 0;
    while (k < header.size() && k < s.second.size() && header[k] == s.second[k]) ++k;
    if (k == header.size() && k == s.second.size()) {
      best = &s;
      best_prefix = k;
      break;
    }
    if (k > best_prefix) {
      best = &s;
      best_prefix = k;
    }
  }
  if (!best) throw SchemaError(file, header.front(), "not the first column of any known schema");
  const auto& want = best->second;
  if (best_prefix < want.size() && best_prefix < header.size()) {
    throw SchemaError(file, header[best_prefix], "expected '" + want[best_prefix] + "' (" + best->first + " schema)");
  }
  if (header.size() < want.size()) throw SchemaError(file, want[header.size()], "missing (" + best->first + " schema)");
  if (header.size() > want.size()) throw SchemaError(file, header[want.size()], "unexpected (" + best->first + " schema)");

  Table t{best->first, header, {}};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_csv(line);
    if (row.size() != header.size()) {
      throw SchemaError(file, header[std::min(row.size(), header.size() - 1)],
                        "row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(row.size()) +
                            " fields");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

constexpr double kW = 480, kH = 300, kL = 56, kR = 16, kT = 32, kB = 44;

std::string svg_open(const std::string& title) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  return o.str();
}

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

// Line chart; `x_ticks` pins the x axis to categorical positions when given.
std::string line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                       const std::vector<Series>& series, const std::vector<double>& x_ticks = {}) {
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (auto [x, y] : s.points) {
      if (!std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  for (double t : x_ticks) {
    x0 = std::min(x0, t);
    x1 = std::max(x1, t);
  }
  if (x0 > x1) x0 = 0, x1 = 1;
  if (y0 > y1) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  // Categorical axis: ticks equally spaced regardless of value.
  auto xpos = [&](double x) {
    if (!x_ticks.empty()) {
      const auto it = std::find(x_ticks.begin(), x_ticks.end(), x);
      const double k = it == x_ticks.end() ? 0 : static_cast<double>(it - x_ticks.begin());
      return kL + (kW - kL - kR) * (x_ticks.size() > 1 ? k / static_cast<double>(x_ticks.size() - 1) : 0.5);
    }
    return kL + (kW - kL - kR) * (x - x0) / (x1 - x0);
  };
  auto ypos = [&](double y) { return kH - kB - (kH - kT - kB) * (y - y0) / (y1 - y0); };
  std::ostringstream o;
  o << svg_open(title);
  o << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\"" << kH - kB
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
    << "\" stroke=\"black\"/>\n";
  const std::vector<double> ticks = x_ticks.empty() ? std::vector<double>{x0, x1} : x_ticks;
  for (double t : ticks) {
    o << "<text x=\"" << fmt(xpos(t), "%.1f") << "\" y=\"" << kH - kB + 14 << "\" text-anchor=\"middle\">"
      << fmt(t, "%g") << "</text>\n";
  }
  for (double y : {y0, y1}) {
    o << "<text x=\"" << kL - 4 << "\" y=\"" << fmt(ypos(y) + 4, "%.1f") << "\" text-anchor=\"end\">"
      << fmt(y, "%.3g") << "</text>\n";
  }
  o << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 8 << "\" text-anchor=\"middle\">" << xlabel
    << "</text>\n";
  o << "<text x=\"14\" y=\"" << (kT + kH - kB) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << (kT + kH - kB) / 2 << ")\">" << ylabel << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* c = kColors[i % 5];
    o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (auto [x, y] : series[i].points) {
      if (!std::isfinite(y)) continue;
      o << (first ? "" : " ") << fmt(xpos(x), "%.1f") << "," << fmt(ypos(y), "%.1f");
      first = false;
    }
    o << "\"/>\n";
    if (series.size() > 1) {
      o << "<text x=\"" << kW - kR - 4 << "\" y=\"" << kT + 12 * (i + 1) << "\" text-anchor=\"end\" fill=\"" << c
        << "\">" << series[i].name << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string bar_chart(const std::string& title, const std::vector<std::string>& groups,
                      const std::vector<std::string>& names, const std::vector<std::vector<double>>& values) {
  double top = 0.0;
  for (const auto& g : values) {
    for (double v : g) top = std::max(top, v);
  }
  if (top <= 0.0) top = 1.0;
  std::ostringstream o;
  o << svg_open(title);
  const double plot_w = kW - kL - kR;
  const double group_w = plot_w / static_cast<double>(std::max<std::size_t>(1, groups.size()));
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(1, names.size()));
  o << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\"" << kH - kB
    << "\" stroke=\"black\"/>\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = kL + group_w * static_cast<double>(g) + group_w * 0.1;
    for (std::size_t k = 0; k < names.size(); ++k) {
      const double v = values[g][k];
      const double h = (kH - kT - kB) * v / top;
      o << "<rect x=\"" << fmt(gx + bar_w * static_cast<double>(k), "%.1f") << "\" y=\""
        << fmt(kH - kB - h, "%.1f") << "\" width=\"" << fmt(bar_w, "%.1f") << "\" height=\"" << fmt(h, "%.1f")
        << "\" fill=\"" << kColors[k % 5] << "\"/>\n";
      o << "<text x=\"" << fmt(gx + bar_w * (static_cast<double>(k) + 0.5), "%.1f") << "\" y=\""
        << fmt(kH - kB - h - 3, "%.1f") << "\" text-anchor=\"middle\" font-size=\"9\">" << fmt(v, "%.3f")
        << "</text>\n";
    }
    o << "<text x=\"" << fmt(gx + group_w * 0.4, "%.1f") << "\" y=\"" << kH - kB + 14
      << "\" text-anchor=\"middle\">" << groups[g] << "</text>\n";
  }
  for (std::size_t k = 0; k < names.size(); ++k) {
    o << "<text x=\"" << kW - kR - 4 << "\" y=\"" << kT + 12 * (k + 1) << "\" text-anchor=\"end\" fill=\""
      << kColors[k % 5] << "\">" << names[k] << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::size_t col(const Table& t, const std::string& name) {
  return static_cast<std::size_t>(std::find(t.header.begin(), t.header.end(), name) - t.header.begin());
}

Series series_of(const Table& t, const std::string& x, const std::string& y) {
  Series s{y, {}};
  const auto cx = col(t, x), cy = col(t, y);
  for (const auto& r : t.rows) s.points.emplace_back(num(r[cx]), num(r[cy]));
  return s;
}

void markdown_table(std::ostream& o, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
  o << "|";
  for (const auto& h : header) o << " " << h << " |";
  o << "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) o << " --- |";
  o << "\n";
  for (const auto& r : rows) {
    o << "|";
    for (const auto& c : r) o << " " << c << " |";
    o << "\n";
  }
  o << "\n";
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << body;
}

// Training CSVs get their first and last rows in the table; the plot carries
// the rest.
std::vector<std::vector<std::string>> ends(const Table& t) {
  if (t.rows.size() <= 2) return t.rows;
  return {t.rows.front(), t.rows.back()};
}

}  // namespace

void make_report(std::vector<fs::path> csvs, const fs::path& out_dir) {
  std::sort(csvs.begin(), csvs.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename() || (a.filename() == b.filename() && a < b); });
  std::vector<Table> tables;
  for (const auto& p : csvs) tables.push_back(read_table(p));
  fs::create_directories(out_dir);

  std::ostringstream md;
  md << "# Experiment report\n\n";
  if (tables.empty()) {
    md << "> **No runs.** No metric CSVs were given, so there is nothing to summarize.\n";
    write_file(out_dir / "index.md", md.str());
    return;
  }
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto& t = tables[i];
    const std::string name = csvs[i].stem().string();
    const std::string svg = name + ".svg";
    md << "## " << name << " (" << t.kind << ")\n\n";
    if (t.rows.empty()) {
      md << "_empty run_\n\n";
      continue;
    }
    if (t.kind == "ppo") {
      markdown_table(md, t.header, ends(t));
      write_file(out_dir / svg, line_chart(name, "iteration", "success rate", {series_of(t, "iteration", "success_rate")}));
    } else if (t.kind == "grpo-trajectory") {
      markdown_table(md, t.header, ends(t));
      write_file(out_dir / svg, line_chart(name, "iteration", "group success", {series_of(t, "iteration", "mean_reward")}));
    } else if (t.kind == "grpo-offline") {
      markdown_table(md, t.header, ends(t));
      write_file(out_dir / svg, line_chart(name, "step", "match rate",
                                           {series_of(t, "step", "type_match"), series_of(t, "step", "exact_match")}));
    } else if (t.kind == "prm-training") {
      markdown_table(md, t.header, t.rows);
      write_file(out_dir / svg, line_chart(name, "epoch", "training loss", {series_of(t, "epoch", "train_loss")}));
    } else if (t.kind == "sweep") {
      markdown_table(md, t.header, t.rows);
      write_file(out_dir / svg, line_chart(name, "candidates n", "success rate",
                                           {series_of(t, "n", "success_rate"), series_of(t, "n", "ci_low"),
                                            series_of(t, "n", "ci_high")},
                                           {1, 3, 5, 8, 16}));
    } else if (t.kind == "ablation") {
      // Per-annotator means, in first-appearance order.
      std::vector<std::string> arms;
      std::map<std::string, std::vector<double>> acc, sr;
      for (const auto& r : t.rows) {
        if (std::find(arms.begin(), arms.end(), r[0]) == arms.end()) arms.push_back(r[0]);
        acc[r[0]].push_back(num(r[3]));
        sr[r[0]].push_back(num(r[4]));
      }
      auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
      };
      std::vector<std::vector<std::string>> rows;
      std::vector<std::vector<double>> bars;
      for (const auto& a : arms) {
        rows.push_back({a, std::to_string(acc[a].size()), fmt(mean(acc[a])), fmt(mean(sr[a]))});
        bars.push_back({mean(acc[a]), mean(sr[a])});
      }
      markdown_table(md, {"annotator", "seeds", "mean prm_accuracy", "mean success_rate"}, rows);
      write_file(out_dir / svg, bar_chart(name, arms, {"prm accuracy", "success rate"}, bars));
    } else if (t.kind == "arms") {
      std::vector<std::string> arms;
      std::map<std::string, std::vector<double>> sr;
      for (const auto& r : t.rows) {
        if (std::find(arms.begin(), arms.end(), r[0]) == arms.end()) arms.push_back(r[0]);
        sr[r[0]].push_back(num(r[2]));
      }
      std::vector<std::vector<std::string>> rows;
      std::vector<std::vector<double>> bars;
      for (const auto& a : arms) {
        double s = 0;
        for (double x : sr[a]) s += x;
        const double m = s / static_cast<double>(sr[a].size());
        rows.push_back({a, std::to_string(sr[a].size()), fmt(m)});
        bars.push_back({m});
      }
      markdown_table(md, {"arm", "seeds", "mean success_rate"}, rows);
      write_file(out_dir / svg, bar_chart(name, arms, {"success rate"}, bars));
    } else {
      markdown_table(md, t.header, t.rows);
      md << "\n";
      continue;
    }
    md << "![" << name << "](" << svg << ")\n\n";
  }
  write_file(out_dir / "index.md", md.str());
}

}  // namespace prmgui::report

#include "xaifn/analysis.hpp"

#include <cstdio>
#include <map>
#include <sstream>

namespace xaifn {

AnalysisPlan AnalysisPlan::by_name(std::string_view name) {
  if (name == "default") return AnalysisPlan{};
  throw Error("BAD_PLAN", "unknown analysis plan \"" + std::string(name) + "\"");
}

json AnalysisPlan::to_json() const {
  json corr = json::array();
  for (const auto& [x, y] : correlations) corr.push_back({x, y});
  return {{"measures", measures},
          {"tests", tests},
          {"correlations", corr},
          {"min_duration_minutes", min_duration_minutes},
          {"alpha", alpha},
          {"levene_center", levene_center == stats::LeveneCenter::Mean ? "mean" : "median"}};
}

namespace {

std::vector<stats::Group> groups_for(const std::vector<const MetricsReport*>& kept, const std::string& measure) {
  std::vector<stats::Group> out;
  for (Condition c : kAllConditions) {
    stats::Group g{to_string(c), {}};
    for (const MetricsReport* m : kept) {
      if (m->condition != c) continue;
      if (auto v = m->measure(measure)) g.values.push_back(*v);
    }
    if (!g.values.empty()) out.push_back(std::move(g));
  }
  return out;
}

std::optional<std::string> skip_reason(const std::vector<stats::Group>& groups) {
  if (groups.size() < 2) return "fewer than 2 conditions have values";
  for (const auto& g : groups) {
    if (g.values.size() < 2) return "condition " + g.name + " has fewer than 2 retained participants";
  }
  return std::nullopt;
}

stats::StatsResult run_test(const std::string& test, const std::vector<stats::Group>& groups,
                            const AnalysisPlan& plan) {
  if (test == "anova") return stats::anova_oneway(groups);
  if (test == "tukey") return stats::tukey_hsd(groups, plan.alpha);
  if (test == "levene") return stats::levene(groups, plan.levene_center);
  if (test == "shapiro") {
    // Normality of the residuals around each condition mean.
    std::vector<double> residuals;
    for (const auto& g : groups) {
      double m = 0.0;
      for (double v : g.values) m += v;
      m /= static_cast<double>(g.values.size());
      for (double v : g.values) residuals.push_back(v - m);
    }
    return stats::shapiro_wilk(residuals);
  }
  throw Error("BAD_PLAN", "unknown test \"" + test + "\"");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

AnalysisReport analyze_study(const std::vector<MetricsReport>& metrics, const AnalysisPlan& plan) {
  AnalysisReport report;
  report.plan = plan;
  report.sessions_in = metrics.size();
  std::vector<const MetricsReport*> kept;
  for (const auto& m : metrics) {
    if (m.duration_minutes < plan.min_duration_minutes) {
      report.excluded.push_back(m.session_id);
    } else {
      kept.push_back(&m);
    }
  }
  report.sessions_retained = kept.size();

  for (const auto& measure : plan.measures) {
    const auto groups = groups_for(kept, measure);
    const auto reason = skip_reason(groups);
    for (const auto& test : plan.tests) {
      AnalysisRow row;
      row.measure = measure;
      row.test = test;
      for (const auto& g : groups) row.group_sizes.emplace_back(g.name, g.values.size());
      if (reason) {
        row.skipped = true;
        row.reason = *reason;
      } else {
        try {
          row.result = run_test(test, groups, plan);
        } catch (const Error& e) {
          row.skipped = true;
          row.reason = e.code() + ": " + e.what();
        }
      }
      report.rows.push_back(std::move(row));
    }
  }

  for (const auto& [xname, yname] : plan.correlations) {
    CorrelationRow row;
    row.x = xname;
    row.y = yname;
    std::vector<double> x, y;
    for (const MetricsReport* m : kept) {
      auto a = m->measure(xname);
      auto b = m->measure(yname);
      if (a && b) {
        x.push_back(*a);
        y.push_back(*b);
      }
    }
    row.n = x.size();
    try {
      row.result = stats::pearson(x, y);
    } catch (const Error& e) {
      row.skipped = true;
      row.reason = e.code() + ": " + e.what();
    }
    report.correlations.push_back(std::move(row));
  }
  return report;
}

json AnalysisReport::to_json() const {
  json rows_j = json::array();
  for (const auto& r : rows) {
    json sizes = json::object();
    for (const auto& [g, n] : r.group_sizes) sizes[g] = n;
    json j = {{"measure", r.measure}, {"test", r.test}, {"skipped", r.skipped}, {"group_sizes", sizes}};
    if (r.skipped) {
      j["reason"] = r.reason;
    } else {
      j["result"] = r.result.to_json();
    }
    rows_j.push_back(std::move(j));
  }
  json corr_j = json::array();
  for (const auto& c : correlations) {
    json j = {{"x", c.x}, {"y", c.y}, {"n", c.n}, {"skipped", c.skipped}};
    if (c.skipped) {
      j["reason"] = c.reason;
    } else {
      j["result"] = c.result.to_json();
    }
    corr_j.push_back(std::move(j));
  }
  return {{"plan", plan.to_json()},
          {"sessions_in", sessions_in},
          {"sessions_retained", sessions_retained},
          {"excluded", excluded},
          {"rows", rows_j},
          {"correlations", corr_j}};
}

std::string AnalysisReport::summary() const {
  std::ostringstream out;
  out << "sessions: " << sessions_in << " in, " << sessions_retained << " retained (min duration "
      << plan.min_duration_minutes << " min)\n\n";
  for (const auto& r : rows) {
    out << r.measure << " / " << r.test << ": ";
    if (r.skipped) {
      out << "skipped (" << r.reason << ")\n";
      continue;
    }
    out << "stat=" << fmt(r.result.statistic) << " df=(";
    for (std::size_t i = 0; i < r.result.df.size(); ++i) out << (i ? ", " : "") << fmt(r.result.df[i]);
    out << ") p=" << fmt(r.result.p_value) << "\n";
    for (const auto& p : r.result.pairwise) {
      out << "    " << p.a << " vs " << p.b << ": diff=" << fmt(p.mean_difference) << " p=" << fmt(p.p_value)
          << (p.reject ? " *" : "") << "\n";
    }
  }
  out << "\ncorrelations:\n";
  for (const auto& c : correlations) {
    out << "  " << c.x << " ~ " << c.y << " (n=" << c.n << "): ";
    if (c.skipped) {
      out << "skipped (" << c.reason << ")\n";
    } else {
      out << "r=" << fmt(c.result.statistic) << " p=" << fmt(c.result.p_value) << "\n";
    }
  }
  return out.str();
}

}  // namespace xaifn

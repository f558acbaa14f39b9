#include "neuromanip/error.hpp"
#include "neuromanip/harness.hpp"
#include "text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace nm::harness {

namespace {

constexpr std::array<int, 3> kMasses = {100, 200, 300};

bool valid_mass(int m) { return std::find(kMasses.begin(), kMasses.end(), m) != kMasses.end(); }

AggregateRow summarize(std::string metric, int mass, const std::vector<double>& xs) {
  AggregateRow row{std::move(metric), mass, static_cast<int>(xs.size()), 0.0, std::nullopt};
  double sum = 0.0;
  for (double x : xs) sum += x;
  row.mean = sum / row.n;
  if (row.n >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - row.mean) * (x - row.mean);
    row.sd = std::sqrt(ss / (row.n - 1));
  }
  return row;
}

void validate_trials(std::span<const TrialRecord> trials) {
  std::set<std::tuple<std::string, int, int>> seen;
  for (const auto& t : trials) {
    if (!valid_mass(t.mass_g)) throw Error(Errc::Validation, "harness", "mass_g must be 100, 200 or 300");
    if (t.trial < 1 || t.trial > 3) throw Error(Errc::Validation, "harness", "trial must be 1..3");
    if (!(t.completion_s > 0.0)) throw Error(Errc::Validation, "harness", "completion_s must be positive");
    if (!seen.emplace(t.participant, t.mass_g, t.trial).second) {
      throw Error(Errc::Validation, "harness",
                  "duplicate trial " + std::to_string(t.trial) + " for " + t.participant + " at " +
                      std::to_string(t.mass_g) + " g");
    }
  }
}

[[noreturn]] void bad_line(const std::filesystem::path& path, int lineno, const std::string& what) {
  throw Error(Errc::Validation, "harness", path.string() + ":" + std::to_string(lineno) + ": " + what);
}

}  // namespace

double fatigue_index(std::span<const TrialRecord> trials) {
  std::array<const TrialRecord*, 3> by_trial{};
  for (const auto& t : trials) {
    if (t.trial < 1 || t.trial > 3) throw Error(Errc::Validation, "harness", "trial must be 1..3");
    if (by_trial[t.trial - 1]) throw Error(Errc::Validation, "harness", "trial " + std::to_string(t.trial) + " repeated");
    by_trial[t.trial - 1] = &t;
  }
  for (int k = 0; k < 3; ++k) {
    if (!by_trial[k]) throw Error(Errc::MissingTrial, "harness", "trial " + std::to_string(k + 1) + " absent");
  }
  return by_trial[2]->completion_s - by_trial[0]->completion_s;
}

std::vector<AggregateRow> study_aggregate(std::span<const TrialRecord> trials) {
  if (trials.empty()) throw Error(Errc::EmptyInput, "harness", "no trial records");
  validate_trials(trials);
  // mass -> participant -> trials, participants in order of first appearance
  std::map<int, std::vector<std::pair<std::string, std::vector<TrialRecord>>>> groups;
  for (const auto& t : trials) {
    auto& g = groups[t.mass_g];
    auto it = std::find_if(g.begin(), g.end(), [&](const auto& p) { return p.first == t.participant; });
    if (it == g.end()) {
      g.emplace_back(t.participant, std::vector<TrialRecord>{});
      it = std::prev(g.end());
    }
    it->second.push_back(t);
  }
  std::vector<AggregateRow> completion, fatigue;
  for (const auto& [mass, participants] : groups) {
    std::vector<double> means, fat;
    for (const auto& [who, ts] : participants) {
      double s = 0.0;
      for (const auto& t : ts) s += t.completion_s;
      means.push_back(s / static_cast<double>(ts.size()));
      try {
        fat.push_back(fatigue_index(ts));
      } catch (const Error& e) {
        throw Error(e.code(), "harness", who + " at " + std::to_string(mass) + " g: " + e.detail());
      }
    }
    completion.push_back(summarize("completion_s", mass, means));
    fatigue.push_back(summarize("fatigue_index_s", mass, fat));
  }
  completion.insert(completion.end(), fatigue.begin(), fatigue.end());
  return completion;
}

std::vector<AggregateRow> study_aggregate(std::span<const TlxRecord> records) {
  if (records.empty()) throw Error(Errc::EmptyInput, "harness", "no TLX records");
  std::set<std::pair<std::string, int>> seen;
  std::map<int, std::array<std::vector<double>, 6>> by_mass;
  for (const auto& r : records) {
    if (!valid_mass(r.mass_g)) throw Error(Errc::Validation, "harness", "mass_g must be 100, 200 or 300");
    if (!seen.emplace(r.participant, r.mass_g).second) {
      throw Error(Errc::Validation, "harness", "duplicate TLX record for " + r.participant);
    }
    for (std::size_t k = 0; k < 6; ++k) {
      if (r.scores[k] < 1 || r.scores[k] > 20) {
        throw Error(Errc::Validation, "harness", std::string(kTlxScales[k]) + " score outside 1..20");
      }
      by_mass[r.mass_g][k].push_back(r.scores[k]);
    }
  }
  std::vector<AggregateRow> out;
  for (std::size_t k = 0; k < 6; ++k) {
    for (const auto& [mass, scales] : by_mass) out.push_back(summarize("tlx_" + std::string(kTlxScales[k]), mass, scales[k]));
  }
  return out;
}

std::vector<AggregateRow> pool_aggregates(std::span<const AggregateRow> rows) {
  if (rows.empty()) throw Error(Errc::EmptyInput, "harness", "no aggregate rows");
  std::vector<std::vector<const AggregateRow*>> groups;
  for (const auto& r : rows) {
    if (r.n < 1) throw Error(Errc::Validation, "harness", r.metric + ": n must be positive");
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
      return g.front()->metric == r.metric && g.front()->mass_g == r.mass_g;
    });
    if (it == groups.end()) groups.push_back({&r});
    else it->push_back(&r);
  }
  std::vector<AggregateRow> out;
  for (const auto& g : groups) {
    if (g.size() == 1) {
      out.push_back(*g.front());
      continue;
    }
    AggregateRow p{g.front()->metric, g.front()->mass_g, 0, 0.0, std::nullopt};
    double weighted = 0.0;
    for (const auto* r : g) {
      p.n += r->n;
      weighted += r->n * r->mean;
    }
    p.mean = weighted / p.n;
    // Combined n-1 variance from group means and SDs; unknown if any group lacks one.
    bool have_sd = true;
    double ss = 0.0;
    for (const auto* r : g) {
      if (r->n >= 2 && !r->sd) have_sd = false;
      const double var = r->sd ? *r->sd * *r->sd : 0.0;
      ss += (r->n - 1) * var + r->n * (r->mean - p.mean) * (r->mean - p.mean);
    }
    if (have_sd && p.n >= 2) p.sd = std::sqrt(ss / (p.n - 1));
    out.push_back(std::move(p));
  }
  return out;
}

StudyTable read_study_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "harness", "cannot read " + path.string());
  std::string line;
  int lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
    for (auto f : text::split(line)) header.emplace_back(text::trim(f));
    break;
  }
  if (header.empty()) throw Error(Errc::EmptyInput, "harness", path.string() + " is empty");

  StudyTable t;
  const std::vector<std::string> trials_h = {"participant", "mass_g", "trial", "completion_s"};
  const std::vector<std::string> agg_h = {"metric", "mass_g", "n", "mean", "sd"};
  std::vector<std::string> tlx_h = {"participant", "mass_g"};
  for (auto s : kTlxScales) tlx_h.emplace_back(s);
  if (header == trials_h) t.kind = StudyCsvKind::Trials;
  else if (header == tlx_h) t.kind = StudyCsvKind::Tlx;
  else if (header == agg_h) t.kind = StudyCsvKind::Aggregates;
  else bad_line(path, lineno, "unrecognized header");

  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
    const auto f = text::split(line);
    if (f.size() != header.size()) {
      bad_line(path, lineno, "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    }
    switch (t.kind) {
      case StudyCsvKind::Trials: {
        TrialRecord r;
        r.participant = std::string(text::trim(f[0]));
        if (r.participant.empty()) bad_line(path, lineno, "participant is empty");
        if (!text::parse(f[1], r.mass_g) || !valid_mass(r.mass_g)) bad_line(path, lineno, "mass_g must be 100, 200 or 300");
        if (!text::parse(f[2], r.trial) || r.trial < 1 || r.trial > 3) bad_line(path, lineno, "trial must be 1..3");
        if (!text::parse(f[3], r.completion_s) || !(r.completion_s > 0.0)) bad_line(path, lineno, "completion_s must be positive");
        t.trials.push_back(std::move(r));
        break;
      }
      case StudyCsvKind::Tlx: {
        TlxRecord r;
        r.participant = std::string(text::trim(f[0]));
        if (r.participant.empty()) bad_line(path, lineno, "participant is empty");
        if (!text::parse(f[1], r.mass_g) || !valid_mass(r.mass_g)) bad_line(path, lineno, "mass_g must be 100, 200 or 300");
        for (std::size_t k = 0; k < 6; ++k) {
          if (!text::parse(f[2 + k], r.scores[k]) || r.scores[k] < 1 || r.scores[k] > 20) {
            bad_line(path, lineno, std::string(kTlxScales[k]) + " must be an integer in 1..20");
          }
        }
        t.tlx.push_back(std::move(r));
        break;
      }
      case StudyCsvKind::Aggregates: {
        AggregateRow r;
        r.metric = std::string(text::trim(f[0]));
        if (r.metric.empty()) bad_line(path, lineno, "metric is empty");
        if (!text::parse(f[1], r.mass_g) || !valid_mass(r.mass_g)) bad_line(path, lineno, "mass_g must be 100, 200 or 300");
        if (!text::parse(f[2], r.n) || r.n < 1) bad_line(path, lineno, "n must be a positive integer");
        if (!text::parse(f[3], r.mean) || !std::isfinite(r.mean)) bad_line(path, lineno, "mean is not a number");
        if (!text::trim(f[4]).empty()) {
          double sd = 0.0;
          if (!text::parse(f[4], sd) || !(sd >= 0.0)) bad_line(path, lineno, "sd must be a non-negative number");
          r.sd = sd;
        }
        t.aggregates.push_back(std::move(r));
        break;
      }
    }
  }
  try {
    if (t.kind == StudyCsvKind::Trials) validate_trials(t.trials);
  } catch (const Error& e) {
    throw Error(e.code(), "harness", path.string() + ": " + e.detail());
  }
  return t;
}

std::vector<AggregateRow> study_stats(const StudyTable& table) {
  switch (table.kind) {
    case StudyCsvKind::Trials: return study_aggregate(std::span<const TrialRecord>(table.trials));
    case StudyCsvKind::Tlx: return study_aggregate(std::span<const TlxRecord>(table.tlx));
    case StudyCsvKind::Aggregates: return pool_aggregates(table.aggregates);
  }
  return {};
}

std::string aggregates_csv(std::span<const AggregateRow> rows) {
  std::ostringstream out;
  out << "metric,mass_g,n,mean,sd\n";
  for (const auto& r : rows) {
    out << r.metric << ',' << r.mass_g << ',' << r.n << ',' << text::fmt(r.mean) << ',';
    if (r.sd) out << text::fmt(*r.sd);
    out << '\n';
  }
  return out.str();
}

}  // namespace nm::harness

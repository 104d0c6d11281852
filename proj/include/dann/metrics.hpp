// dann/metrics.hpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Prediction sets, score fusion, and mean unweighted F1 reporting.
// Ties at 0.5/0.5 resolve to child (class 0); per-class F1 with an empty
// denominator is 0. Both conventions are relied on by tests.

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dann/dataset.hpp"
#include "dann/error.hpp"

namespace dann {

struct Prediction {
  double p_child = 0.5;
  double p_adult = 0.5;
  int predicted = kChild;
  int label = -1;  // -1 when truth is withheld
  std::string session_id;
  std::size_t center = 0;
  int domain = -1;
};

using PredictionSet = std::vector<Prediction>;

inline int argmax_posterior(double p_child, double p_adult) {
  return p_adult > p_child ? kAdult : kChild;  // tie goes to child
}

struct ClassScore {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct F1Report {
  std::size_t n = 0;
  std::size_t confusion[2][2] = {{0, 0}, {0, 0}};  // [truth][predicted]
  ClassScore per_class[2];
  double mean_f1 = 0.0;
  std::vector<std::pair<std::string, double>> per_session;
};

namespace detail {

inline ClassScore score_class(const std::size_t confusion[2][2], int c) {
  ClassScore s;
  s.tp = confusion[c][c];
  s.fp = confusion[1 - c][c];
  s.fn = confusion[c][1 - c];
  s.precision = s.tp + s.fp == 0
                    ? 0.0
                    : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
  s.recall = s.tp + s.fn == 0
                 ? 0.0
                 : static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
  s.f1 = s.precision + s.recall == 0.0
             ? 0.0
             : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

inline double mean_f1_of_counts(const std::size_t confusion[2][2]) {
  return (score_class(confusion, kChild).f1 +
          score_class(confusion, kAdult).f1) /
         2.0;
}

}  // namespace detail

/// Mean unweighted F1 over {child, adult}. Every prediction must carry a
/// true label. Optionally breaks the score down per session.
inline F1Report mean_f1(const PredictionSet& predictions,
                        bool per_session = false) {
  if (predictions.empty()) {
    throw DegenerateError("cannot score an empty prediction set");
  }
  F1Report report;
  std::map<std::string, std::size_t> session_confusion_index;
  std::vector<std::array<std::array<std::size_t, 2>, 2>> session_counts;
  std::vector<std::string> session_ids;
  for (const auto& p : predictions) {
    if (p.label != kChild && p.label != kAdult) {
      throw LabelError("prediction for session '" + p.session_id +
                       "' center " + std::to_string(p.center) +
                       " has no true label");
    }
    if (p.predicted != kChild && p.predicted != kAdult) {
      throw LabelError("prediction carries an invalid predicted class");
    }
    ++report.confusion[p.label][p.predicted];
    ++report.n;
    if (per_session) {
      auto [it, fresh] = session_confusion_index.try_emplace(
          p.session_id, session_counts.size());
      if (fresh) {
        session_counts.push_back({});
        session_ids.push_back(p.session_id);
      }
      ++session_counts[it->second][p.label][p.predicted];
    }
  }
  report.per_class[kChild] = detail::score_class(report.confusion, kChild);
  report.per_class[kAdult] = detail::score_class(report.confusion, kAdult);
  report.mean_f1 = (report.per_class[0].f1 + report.per_class[1].f1) / 2.0;
  if (per_session) {
    for (std::size_t i = 0; i < session_counts.size(); ++i) {
      std::size_t counts[2][2] = {
          {session_counts[i][0][0], session_counts[i][0][1]},
          {session_counts[i][1][0], session_counts[i][1][1]}};
      report.per_session.emplace_back(session_ids[i],
                                      detail::mean_f1_of_counts(counts));
    }
  }
  return report;
}

/// Elementwise posterior mean of two prediction sets covering the same
/// samples in the same order; predicted labels are re-derived by argmax.
inline PredictionSet score_fuse(const PredictionSet& a,
                                const PredictionSet& b) {
  if (a.size() != b.size()) {
    throw AlignmentError("prediction sets differ in size: " +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  PredictionSet fused;
  fused.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Prediction& pa = a[i];
    const Prediction& pb = b[i];
    if (pa.session_id != pb.session_id || pa.center != pb.center) {
      throw AlignmentError("prediction sets disagree at row " +
                           std::to_string(i) + ": " + pa.session_id + ":" +
                           std::to_string(pa.center) + " vs " +
                           pb.session_id + ":" + std::to_string(pb.center));
    }
    if (pa.label != pb.label) {
      throw AlignmentError("prediction sets carry different labels at row " +
                           std::to_string(i));
    }
    Prediction f = pa;
    f.p_child = (pa.p_child + pb.p_child) / 2.0;
    f.p_adult = (pa.p_adult + pb.p_adult) / 2.0;
    f.predicted = argmax_posterior(f.p_child, f.p_adult);
    fused.push_back(std::move(f));
  }
  return fused;
}

// --- file formats ------------------------------------------------------
// Predictions: header then one row per sample,
//   session<TAB>center<TAB>domain<TAB>label<TAB>p_child<TAB>p_adult
// label is child/adult or ? when withheld. Posteriors are full-precision
// (round-trippable) decimal text.

inline constexpr const char* kPredictionsHeader =
    "session\tcenter\tdomain\tlabel\tp_child\tp_adult";

inline void write_predictions(const std::string& path,
                              const PredictionSet& predictions) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kPredictionsHeader << "\n";
  char buf[64];
  for (const auto& p : predictions) {
    out << p.session_id << '\t' << p.center << '\t'
        << (p.domain == kTarget ? "target" : "source") << '\t'
        << (p.label < 0 ? "?" : speaker_name(p.label)) << '\t';
    std::snprintf(buf, sizeof(buf), "%.17g", p.p_child);
    out << buf << '\t';
    std::snprintf(buf, sizeof(buf), "%.17g", p.p_adult);
    out << buf << "\n";
  }
  if (!out) throw IoError("prediction write failed: " + path);
}

inline PredictionSet read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  PredictionSet out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != kPredictionsHeader) {
        throw ParseError(path + " line 1: bad header");
      }
      continue;
    }
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 6) {
      throw ParseError(path + " line " + std::to_string(lineno) +
                       ": expected 6 fields");
    }
    Prediction p;
    p.session_id = fields[0];
    try {
      p.center = std::stoull(fields[1]);
      p.p_child = std::stod(fields[4]);
      p.p_adult = std::stod(fields[5]);
    } catch (const std::exception&) {
      throw ParseError(path + " line " + std::to_string(lineno) +
                       ": bad numeric field");
    }
    if (fields[2] == "source") {
      p.domain = kSource;
    } else if (fields[2] == "target") {
      p.domain = kTarget;
    } else {
      throw ParseError(path + " line " + std::to_string(lineno) +
                       ": unknown domain '" + fields[2] + "'");
    }
    if (fields[3] == "?") {
      p.label = -1;
    } else if (fields[3] == "child") {
      p.label = kChild;
    } else if (fields[3] == "adult") {
      p.label = kAdult;
    } else {
      throw ParseError(path + " line " + std::to_string(lineno) +
                       ": unknown label '" + fields[3] + "'");
    }
    p.predicted = argmax_posterior(p.p_child, p.p_adult);
    out.push_back(std::move(p));
  }
  return out;
}

/// Key=value report block; fixed six-significant-digit formatting so
/// reruns reproduce reports byte for byte.
inline void write_report(std::ostream& out, const F1Report& r) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  out << "samples=" << r.n << "\n";
  const char* names[2] = {"child", "adult"};
  for (int c : {kChild, kAdult}) {
    out << names[c] << "_precision=" << num(r.per_class[c].precision) << "\n";
    out << names[c] << "_recall=" << num(r.per_class[c].recall) << "\n";
    out << names[c] << "_f1=" << num(r.per_class[c].f1) << "\n";
  }
  out << "mean_f1=" << num(r.mean_f1) << "\n";
  for (int t : {kChild, kAdult}) {
    for (int h : {kChild, kAdult}) {
      out << "confusion_" << names[t] << "_" << names[h] << "="
          << r.confusion[t][h] << "\n";
    }
  }
  for (const auto& [session, f1] : r.per_session) {
    out << "session_f1." << session << "=" << num(f1) << "\n";
  }
}

}  // namespace dann

// dann/manifest.hpp
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

// Corpus manifests: tab-separated, one row per session, header
//   session<TAB>domain<TAB>audio<TAB>labels<TAB>split
// `audio` is a WAV path, or `feat:<path>` for precomputed features.
// Relative paths are resolved against the manifest's directory on load.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "dann/error.hpp"

namespace dann {

enum class Split { kTrain, kHeldout, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kHeldout: return "heldout";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "heldout") return Split::kHeldout;
  if (s == "test") return Split::kTest;
  throw ParseError("unknown split '" + s + "'");
}

struct SessionManifest {
  std::string session_id;
  std::string domain_tag;  // free string; the experiment maps it to a side
  std::string audio;       // resolved path after load_manifest
  bool is_feature = false; // audio came as feat:<path>
  std::string labels;      // resolved segment-file path
  Split split = Split::kTrain;
};

inline constexpr const char* kManifestHeader =
    "session\tdomain\taudio\tlabels\tsplit";

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return fields;
}

}  // namespace detail

inline std::vector<SessionManifest> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  const std::filesystem::path base = std::filesystem::path(path).parent_path();

  std::vector<SessionManifest> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kManifestHeader) {
        throw ParseError(path + " line " + std::to_string(lineno) +
                         ": bad header, expected '" +
                         std::string(kManifestHeader) + "'");
      }
      saw_header = true;
      continue;
    }
    const auto fields = detail::split_tabs(line);
    if (fields.size() != 5) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": expected 5 tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      if (f.empty()) {
        throw ParseError(path + " line " + std::to_string(lineno) +
                         ": empty field");
      }
    }
    SessionManifest m;
    m.session_id = fields[0];
    m.domain_tag = fields[1];
    std::string audio = fields[2];
    if (audio.rfind("feat:", 0) == 0) {
      m.is_feature = true;
      audio = audio.substr(5);
      if (audio.empty()) {
        throw ParseError(path + " line " + std::to_string(lineno) +
                         ": empty feature path");
      }
    }
    m.audio = (base / audio).string();
    m.labels = (base / fields[3]).string();
    try {
      m.split = parse_split(fields[4]);
    } catch (const ParseError& e) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": " +
                       e.what());
    }
    if (!seen.insert(m.session_id).second) {
      throw ValidationError("duplicate session id '" + m.session_id + "' in " +
                            path);
    }
    if (!std::filesystem::exists(m.audio)) {
      throw ValidationError("referenced file does not exist: " + m.audio);
    }
    if (!std::filesystem::exists(m.labels)) {
      throw ValidationError("referenced file does not exist: " + m.labels);
    }
    out.push_back(std::move(m));
  }
  return out;
}

/// Writes rows verbatim (no path resolution); pair with relative paths to
/// keep a generated corpus relocatable.
struct ManifestRow {
  std::string session_id;
  std::string domain_tag;
  std::string audio;  // literal field, may carry the feat: prefix
  std::string labels;
  Split split = Split::kTrain;
};

inline void write_manifest(const std::string& path,
                           const std::vector<ManifestRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << kManifestHeader << "\n";
  for (const auto& r : rows) {
    out << r.session_id << '\t' << r.domain_tag << '\t' << r.audio << '\t'
        << r.labels << '\t' << split_name(r.split) << "\n";
  }
  if (!out) throw IoError("manifest write failed: " + path);
}

}  // namespace dann

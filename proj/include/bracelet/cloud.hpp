// Copyright 2026 The Bracelet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tag service core, transport-free: accept case uploads, publish the infected
// index behind a pagination cursor, answer exposure checks. State is exactly
// the fold of a JSONL journal; replaying it reproduces byte-identical fetch
// responses. Check requests are never journaled.

#ifndef BRACELET_CLOUD_HPP_
#define BRACELET_CLOUD_HPP_

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "bracelet/device.hpp"
#include "bracelet/error.hpp"
#include "bracelet/matching.hpp"

#include "json.hpp"

namespace bracelet {

inline constexpr std::size_t kMaxUploadTags = 2048;

class TagService {
 public:
  struct Options {
    std::optional<std::filesystem::path> journal_path;  // absent: in-memory only
    std::optional<std::uint64_t> group_id_seed;         // absent: OS entropy
    double default_threshold_s = kDefaultExposureThresholdS;
  };

  explicit TagService(Options options)
      : options_(options),
        index_(options.group_id_seed ? InfectedIndex(*options.group_id_seed)
                                     : InfectedIndex()) {
    if (options_.journal_path) {
      replay_journal(*options_.journal_path);
      journal_out_.open(*options_.journal_path, std::ios::app);
      if (!journal_out_) {
        throw Error(ErrorCode::kIo,
                    "cannot open journal for append: " + options_.journal_path->string());
      }
    }
  }

  // POST /v1/cases. Body: {"tags":[{"tag":hex32,"active_from_s":s,"active_until_s":s},...]}
  // (bare hex strings are also accepted). Journal line is written before the
  // response exists.
  nlohmann::ordered_json handle_upload(const nlohmann::json& body) {
    std::vector<Tag> tags = parse_upload_tags(body);
    std::lock_guard<std::mutex> lock(mu_);
    auto result = index_.register_case(tags);
    if (result.created) {
      try {
        append_journal_line(*result.group);
      } catch (...) {
        index_.pop_last_group();
        throw;
      }
    }
    return nlohmann::ordered_json{{"group_id", result.group->group_id.hex()},
                                  {"cursor", result.group->cursor}};
  }

  // GET /v1/infected?cursor=N. Groups published after N, oldest first; the
  // top-level cursor is the point to resume from.
  nlohmann::ordered_json handle_fetch(std::uint64_t cursor) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto groups = index_.groups_after(cursor);
    nlohmann::ordered_json groups_json = nlohmann::ordered_json::array();
    for (const auto& group : groups) {
      groups_json.push_back(group_json(group));
    }
    return nlohmann::ordered_json{{"groups", std::move(groups_json)},
                                  {"cursor", index_.cursor()}};
  }

  // POST /v1/check. Body: {"contacts":[{"tag":hex32,"exposure_s":s},...],
  // "threshold_s": optional}. Nothing from the request is persisted or logged.
  nlohmann::ordered_json handle_check(const nlohmann::json& body) const {
    double threshold = options_.default_threshold_s;
    std::vector<TagExposure> contacts = parse_check_contacts(body, &threshold);
    std::lock_guard<std::mutex> lock(mu_);
    ExposureDecision decision = match_contacts(index_, contacts, threshold);
    return decision_json(decision);
  }

  static nlohmann::ordered_json decision_json(const ExposureDecision& decision) {
    return nlohmann::ordered_json{{"positive", decision.positive},
                                  {"matched_group_count", decision.matched_group_count},
                                  {"max_group_exposure_s", decision.max_group_exposure_s}};
  }

  std::uint64_t cursor() const {
    std::lock_guard<std::mutex> lock(mu_);
    return index_.cursor();
  }

  // Snapshot of all published groups, for in-process local-mode matching.
  std::vector<CaseGroup> groups_snapshot(std::uint64_t after_cursor = 0) const {
    std::lock_guard<std::mutex> lock(mu_);
    return index_.groups_after(after_cursor);
  }

  double default_threshold_s() const { return options_.default_threshold_s; }

 private:
  static nlohmann::ordered_json group_json(const CaseGroup& group) {
    nlohmann::ordered_json tags = nlohmann::ordered_json::array();
    for (const auto& tag : group.tags) tags.push_back(tag.hex());
    return nlohmann::ordered_json{
        {"cursor", group.cursor}, {"group_id", group.group_id.hex()}, {"tags", std::move(tags)}};
  }

  static std::vector<Tag> parse_upload_tags(const nlohmann::json& body) {
    if (!body.is_object() || !body.contains("tags") || !body["tags"].is_array()) {
      throw Error(ErrorCode::kMalformedRequest, "body must be {\"tags\": [...]}");
    }
    const auto& tags_json = body["tags"];
    if (tags_json.empty()) {
      throw Error(ErrorCode::kMalformedRequest, "bundle must contain at least one tag");
    }
    if (tags_json.size() > kMaxUploadTags) {
      throw Error(ErrorCode::kOversizeRequest,
                  "bundle exceeds " + std::to_string(kMaxUploadTags) + " tags");
    }
    std::vector<Tag> tags;
    tags.reserve(tags_json.size());
    for (const auto& entry : tags_json) {
      if (entry.is_string()) {
        tags.push_back(Tag::from_hex(entry.get<std::string>()));
      } else if (entry.is_object() && entry.contains("tag") && entry["tag"].is_string()) {
        tags.push_back(Tag::from_hex(entry["tag"].get<std::string>()));
      } else {
        throw Error(ErrorCode::kMalformedRequest,
                    "tag entries must be hex strings or {\"tag\": hex}");
      }
    }
    return tags;
  }

  static std::vector<TagExposure> parse_check_contacts(const nlohmann::json& body,
                                                       double* threshold) {
    if (!body.is_object() || !body.contains("contacts") || !body["contacts"].is_array()) {
      throw Error(ErrorCode::kMalformedRequest, "body must be {\"contacts\": [...]}");
    }
    if (body.contains("threshold_s")) {
      if (!body["threshold_s"].is_number() || body["threshold_s"].get<double>() <= 0.0) {
        throw Error(ErrorCode::kMalformedRequest, "threshold_s must be a positive number");
      }
      *threshold = body["threshold_s"].get<double>();
    }
    std::vector<TagExposure> contacts;
    for (const auto& entry : body["contacts"]) {
      if (!entry.is_object() || !entry.contains("tag") || !entry.contains("exposure_s") ||
          !entry["exposure_s"].is_number()) {
        throw Error(ErrorCode::kMalformedRequest,
                    "contacts must be {\"tag\": hex, \"exposure_s\": seconds}");
      }
      double exposure = entry["exposure_s"].get<double>();
      if (exposure < 0.0) {
        throw Error(ErrorCode::kMalformedRequest, "exposure_s must be non-negative");
      }
      contacts.push_back(TagExposure{Tag::from_hex(entry["tag"].get<std::string>()), exposure});
    }
    return contacts;
  }

  void replay_journal(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
      if (std::filesystem::exists(path)) {
        throw Error(ErrorCode::kIo, "cannot read journal: " + path.string());
      }
      return;  // fresh journal
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        auto entry = nlohmann::json::parse(line);
        GroupId group_id = GroupId::from_hex(entry.at("group_id").get<std::string>());
        std::uint64_t cursor = entry.at("cursor").get<std::uint64_t>();
        std::vector<Tag> tags;
        for (const auto& hex : entry.at("tags")) {
          tags.push_back(Tag::from_hex(hex.get<std::string>()));
        }
        index_.restore_case(group_id, cursor, tags);
      } catch (const Error&) {
        throw;
      } catch (const std::exception& e) {
        throw Error(ErrorCode::kIo, "journal line " + std::to_string(line_no) +
                                        " unreadable: " + e.what());
      }
    }
  }

  void append_journal_line(const CaseGroup& group) {
    if (!options_.journal_path) return;
    journal_out_ << group_json(group).dump() << '\n';
    journal_out_.flush();
    if (!journal_out_) {
      throw Error(ErrorCode::kIo, "journal write failed");
    }
  }

  Options options_;
  mutable std::mutex mu_;
  InfectedIndex index_;
  std::ofstream journal_out_;
};

}  // namespace bracelet

#endif  // BRACELET_CLOUD_HPP_

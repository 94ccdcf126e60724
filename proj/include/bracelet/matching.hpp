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

// Case-group linkage and exposure matching. All tags uploaded by one infected
// device land in one randomly-identified group, so a querying device's
// exposure keeps accumulating across that device's tag rotations. The
// device-side (local_match) and server-side (match_contacts) routes are kept
// as separate code paths on purpose: their agreement is a tested invariant,
// not an implementation accident.

#ifndef BRACELET_MATCHING_HPP_
#define BRACELET_MATCHING_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bracelet/error.hpp"
#include "bracelet/hex.hpp"
#include "bracelet/protocol.hpp"
#include "bracelet/rng.hpp"

namespace bracelet {

inline constexpr double kDefaultExposureThresholdS = 900.0;

struct GroupId {
  std::array<std::uint8_t, 16> bytes{};

  auto operator<=>(const GroupId&) const = default;

  std::string hex() const { return to_hex(bytes); }
  static GroupId from_hex(std::string_view h) { return GroupId{from_hex_array<16>(h)}; }
};

// One infected device's published tags. `cursor` is the publication number
// assigned when the upload was accepted (1-based, dense).
struct CaseGroup {
  GroupId group_id;
  std::uint64_t cursor = 0;
  std::vector<Tag> tags;  // sorted, unique
};

struct TagExposure {
  Tag tag;
  double exposure_s = 0.0;
};

struct ExposureDecision {
  bool positive = false;
  int matched_group_count = 0;
  double max_group_exposure_s = 0.0;
};

class InfectedIndex {
 public:
  InfectedIndex() : rng_(SplitMix64::from_entropy()) {}
  explicit InfectedIndex(std::uint64_t seed) : rng_(seed) {}

  struct RegisterResult {
    const CaseGroup* group = nullptr;
    bool created = false;
  };

  // Links the bundle's tags under a fresh random group id. Re-registering an
  // identical tag set is idempotent; partial overlap is an error.
  RegisterResult register_case(std::span<const Tag> tags) {
    auto normalized = normalize(tags);
    if (normalized.empty()) {
      throw Error(ErrorCode::kMalformedRequest, "upload bundle has no tags");
    }
    bool any_overlap = false;
    bool single_group = true;
    std::size_t overlap_group = 0;
    for (const auto& tag : normalized) {
      auto it = tag_to_group_.find(tag);
      if (it == tag_to_group_.end()) continue;
      if (any_overlap && it->second != overlap_group) single_group = false;
      overlap_group = it->second;
      any_overlap = true;
    }
    if (any_overlap) {
      // Only a byte-identical re-upload of one existing case is idempotent.
      if (single_group && groups_[overlap_group].tags == normalized) {
        return RegisterResult{&groups_[overlap_group], false};
      }
      throw Error(ErrorCode::kDuplicateUpload,
                  "bundle overlaps an already-registered case");
    }
    GroupId id{rng_.bytes<16>()};
    return RegisterResult{&append_group(id, normalized), true};
  }

  // Journal-replay path: restores a group exactly as it was first accepted.
  const CaseGroup& restore_case(const GroupId& group_id, std::uint64_t cursor,
                                std::span<const Tag> tags) {
    auto normalized = normalize(tags);
    if (normalized.empty() || cursor != cursor_ + 1) {
      throw Error(ErrorCode::kIo, "journal entry out of sequence");
    }
    for (const auto& tag : normalized) {
      if (tag_to_group_.count(tag) > 0) {
        throw Error(ErrorCode::kIo, "journal entry repeats a tag");
      }
    }
    return append_group(group_id, normalized);
  }

  std::span<const CaseGroup> groups() const { return groups_; }
  std::uint64_t cursor() const { return cursor_; }

  // Groups published after `cursor`, oldest first.
  std::vector<CaseGroup> groups_after(std::uint64_t cursor) const {
    if (cursor > cursor_) {
      throw Error(ErrorCode::kMalformedRequest,
                  "cursor " + std::to_string(cursor) + " is in the future (current " +
                      std::to_string(cursor_) + ")");
    }
    return std::vector<CaseGroup>(groups_.begin() + static_cast<std::ptrdiff_t>(cursor),
                                  groups_.end());
  }

  const CaseGroup* group_of(const Tag& tag) const {
    auto it = tag_to_group_.find(tag);
    return it == tag_to_group_.end() ? nullptr : &groups_[it->second];
  }

  // Undo of the most recent registration, for hosts whose durable write
  // failed after the in-memory commit.
  void pop_last_group() {
    if (groups_.empty()) return;
    for (const auto& tag : groups_.back().tags) {
      tag_to_group_.erase(tag);
    }
    groups_.pop_back();
    --cursor_;
  }

 private:
  static std::vector<Tag> normalize(std::span<const Tag> tags) {
    std::vector<Tag> out(tags.begin(), tags.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  const CaseGroup& append_group(const GroupId& id, std::vector<Tag> tags) {
    CaseGroup group;
    group.group_id = id;
    group.cursor = ++cursor_;
    group.tags = std::move(tags);
    groups_.push_back(std::move(group));
    std::size_t idx = groups_.size() - 1;
    for (const auto& tag : groups_.back().tags) {
      tag_to_group_[tag] = idx;
    }
    return groups_.back();
  }

  std::vector<CaseGroup> groups_;
  std::map<Tag, std::size_t> tag_to_group_;
  std::uint64_t cursor_ = 0;
  SplitMix64 rng_;
};

// Per-group exposure sums; only groups with a matched contact appear.
inline std::vector<std::pair<GroupId, double>> group_exposures(
    std::span<const CaseGroup> groups, std::span<const TagExposure> contacts) {
  std::map<Tag, double> by_tag;
  for (const auto& c : contacts) {
    by_tag[c.tag] += c.exposure_s;
  }
  std::vector<std::pair<GroupId, double>> out;
  for (const auto& group : groups) {
    double total = 0.0;
    bool matched = false;
    for (const auto& tag : group.tags) {
      auto it = by_tag.find(tag);
      if (it != by_tag.end()) {
        total += it->second;
        matched = true;
      }
    }
    if (matched && total > 0.0) {
      out.emplace_back(group.group_id, total);
    }
  }
  return out;
}

// Server-side route: aggregates through the index's tag→group lookup.
inline ExposureDecision match_contacts(const InfectedIndex& index,
                                       std::span<const TagExposure> contacts,
                                       double exposure_threshold_s = kDefaultExposureThresholdS) {
  std::map<const CaseGroup*, double> per_group;
  for (const auto& contact : contacts) {
    const CaseGroup* group = index.group_of(contact.tag);
    if (group != nullptr) {
      per_group[group] += contact.exposure_s;
    }
  }
  ExposureDecision decision;
  for (const auto& [group, exposure] : per_group) {
    if (exposure > 0.0) {
      ++decision.matched_group_count;
    }
    decision.max_group_exposure_s = std::max(decision.max_group_exposure_s, exposure);
  }
  decision.positive = decision.max_group_exposure_s >= exposure_threshold_s;
  return decision;
}

// Device-side route: same decision computed from a fetched snapshot.
inline ExposureDecision local_match(std::span<const CaseGroup> snapshot,
                                    std::span<const TagExposure> contacts,
                                    double exposure_threshold_s = kDefaultExposureThresholdS) {
  ExposureDecision decision;
  for (const auto& [group_id, exposure] : group_exposures(snapshot, contacts)) {
    ++decision.matched_group_count;
    decision.max_group_exposure_s = std::max(decision.max_group_exposure_s, exposure);
  }
  decision.positive = decision.max_group_exposure_s >= exposure_threshold_s;
  return decision;
}

}  // namespace bracelet

#endif  // BRACELET_MATCHING_HPP_

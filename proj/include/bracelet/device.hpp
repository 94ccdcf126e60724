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

// The bracelet state machine. Owns the contacts and tags tables, accumulates
// exposure per heard tag, counts social-distancing violations, evaluates
// symptoms, classifies risk, and prepares consented uploads. Performs no I/O:
// everything outward-facing is returned as Effect values.

#ifndef BRACELET_DEVICE_HPP_
#define BRACELET_DEVICE_HPP_

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bracelet/distance.hpp"
#include "bracelet/error.hpp"
#include "bracelet/matching.hpp"
#include "bracelet/protocol.hpp"
#include "bracelet/risk.hpp"

#include "json.hpp"

namespace bracelet {

struct ContactRecord {
  Tag tag;
  double first_heard_s = 0.0;
  double last_heard_s = 0.0;
  double exposure_s = 0.0;
  double min_distance_m = 0.0;
};

struct OwnTagRecord {
  Tag tag;
  EpochIndex epoch = 0;
  double active_from_s = 0.0;
  double active_until_s = 0.0;
};

struct SensorSample {
  double timestamp_s = 0.0;
  double temperature_c = 36.6;
  double spo2_pct = 98.0;
  bool cough_event = false;
};

struct SymptomState {
  bool fever = false;
  bool low_spo2 = false;
  bool excessive_cough = false;

  bool abnormal() const { return fever || low_spo2 || excessive_cough; }
};

struct DeviceConfig {
  double epoch_length_s = kDefaultEpochLengthS;
  double contact_gap_s = 10.0;
  double violation_threshold_m = kDefaultViolationThresholdM;
  double violation_debounce_s = 60.0;
  int excessive_violation_count = 10;
  double violation_window_s = 86400.0;
  int cough_rate_threshold = 10;
  double cough_window_s = 3600.0;
  double retention_s = 14.0 * 86400.0;
  std::int8_t tx_power_dbm = kDefaultTxPowerDbm;
  bool auto_upload_on_high_risk = true;
  bool consent_required = true;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) {
        throw Error(ErrorCode::kInvalidConfig, std::string(name) + " must be positive");
      }
    };
    positive(epoch_length_s, "epoch_length_s");
    positive(contact_gap_s, "contact_gap_s");
    positive(violation_threshold_m, "violation_threshold_m");
    positive(violation_debounce_s, "violation_debounce_s");
    positive(violation_window_s, "violation_window_s");
    positive(cough_window_s, "cough_window_s");
    positive(retention_s, "retention_s");
    if (excessive_violation_count < 1 || cough_rate_threshold < 1) {
      throw Error(ErrorCode::kInvalidConfig, "event-count thresholds must be >= 1");
    }
  }
};

// What a consenting device sends to the tag service. Tags and their active
// windows only; the seed, contacts table, and sensor data never enter it.
struct UploadBundle {
  struct Entry {
    Tag tag;
    double active_from_s = 0.0;
    double active_until_s = 0.0;
  };
  std::vector<Entry> entries;

  std::vector<Tag> tags() const {
    std::vector<Tag> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.tag);
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json tags_json = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
      tags_json.push_back({{"tag", e.tag.hex()},
                           {"active_from_s", e.active_from_s},
                           {"active_until_s", e.active_until_s}});
    }
    return nlohmann::ordered_json{{"tags", std::move(tags_json)}};
  }
};

struct ContactUpdated {
  Tag tag;
  double exposure_s = 0.0;
  double distance_m = 0.0;
};

struct ViolationAlert {
  Tag tag;
  double distance_m = 0.0;
  bool counted = false;  // debounced: one counted violation per tag per 60 s
};

struct RiskChanged {
  RiskLevel from = RiskLevel::kNoRisk;
  RiskLevel to = RiskLevel::kNoRisk;
};

struct UploadReady {
  UploadBundle bundle;
};

using Effect = std::variant<ContactUpdated, ViolationAlert, RiskChanged, UploadReady>;

class DeviceState {
 public:
  DeviceState(DeviceSeed seed, DeviceConfig config, PathLossModel model,
              bool consent_granted)
      : seed_(seed),
        config_(config),
        model_(model),
        consent_granted_(consent_granted) {
    config_.validate();
  }

  // Closes out the previous epoch's identity and derives the next one. A call
  // that lands k>1 epochs later backfills the skipped epochs so the tags table
  // still partitions time.
  std::optional<std::pair<Tag, BeaconAddress>> rotate_if_due(double now_s) {
    EpochIndex epoch = epoch_of(now_s, config_.epoch_length_s);
    if (own_tags_.empty()) {
      open_record(epoch, now_s);
      return std::make_pair(own_tags_.back().tag, current_address_);
    }
    OwnTagRecord& current = own_tags_.back();
    if (epoch == current.epoch) {
      current.active_until_s = std::max(current.active_until_s, now_s);
      return std::nullopt;
    }
    if (epoch < current.epoch) {
      throw Error(ErrorCode::kClockInconsistency, "time moved backwards across epochs");
    }
    if (epoch == current.epoch + 1) {
      current.active_until_s = now_s;
      open_record(epoch, now_s);
    } else {
      double length = config_.epoch_length_s;
      current.active_until_s = epoch_start_s(current.epoch + 1, length);
      for (EpochIndex skipped = current.epoch + 1; skipped < epoch; ++skipped) {
        OwnTagRecord rec;
        rec.tag = derive_tag(seed_, skipped);
        rec.epoch = skipped;
        rec.active_from_s = epoch_start_s(skipped, length);
        rec.active_until_s = epoch_start_s(skipped + 1, length);
        own_tags_.push_back(rec);
      }
      open_record(epoch, epoch_start_s(epoch, length));
    }
    return std::make_pair(own_tags_.back().tag, current_address_);
  }

  Beacon current_beacon() const {
    if (own_tags_.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "device has no identity yet; rotate first");
    }
    Beacon beacon;
    beacon.tag = own_tags_.back().tag;
    beacon.tx_power_dbm = config_.tx_power_dbm;
    beacon.address = current_address_;
    return beacon;
  }

  std::vector<Effect> on_beacon(const Beacon& beacon, double rssi_dbm, double now_s) {
    std::vector<Effect> effects;
    double distance = model_.estimate_distance(beacon.tx_power_dbm, rssi_dbm);

    if (is_violation(distance, config_.violation_threshold_m)) {
      bool counted = false;
      auto last = last_counted_violation_.find(beacon.tag);
      if (last == last_counted_violation_.end() ||
          now_s - last->second >= config_.violation_debounce_s) {
        last_counted_violation_[beacon.tag] = now_s;
        violation_times_.push_back(now_s);
        counted = true;
      }
      effects.push_back(ViolationAlert{beacon.tag, distance, counted});
    }

    auto [it, inserted] = contacts_.try_emplace(
        beacon.tag, ContactRecord{beacon.tag, now_s, now_s, 0.0, distance});
    ContactRecord& rec = it->second;
    if (!inserted) {
      if (now_s >= rec.last_heard_s) {
        double delta = now_s - rec.last_heard_s;
        // Gap-bounded accumulation: missing a few beacons still counts, a
        // long absence does not.
        if (delta <= config_.contact_gap_s) {
          rec.exposure_s += delta;
        }
        rec.last_heard_s = now_s;
      }
      rec.min_distance_m = std::min(rec.min_distance_m, distance);
    }
    effects.push_back(ContactUpdated{beacon.tag, rec.exposure_s, distance});

    append_risk_effects(effects, now_s);
    return effects;
  }

  // Evaluates one reading. Out-of-range readings are rejected and count
  // toward nothing. Fever is strictly > 38.0 C, low SpO2 strictly < 90%.
  SymptomState on_sensor_sample(const SensorSample& sample, double now_s) {
    if (sample.temperature_c < 25.0 || sample.temperature_c > 45.0 ||
        sample.spo2_pct < 50.0 || sample.spo2_pct > 100.0) {
      throw Error(ErrorCode::kRejectedSample, "sensor reading out of accepted range");
    }
    last_temperature_c_ = sample.temperature_c;
    last_spo2_pct_ = sample.spo2_pct;
    symptoms_.fever = sample.temperature_c > 38.0;
    symptoms_.low_spo2 = sample.spo2_pct < 90.0;
    if (sample.cough_event) {
      cough_times_.push_back(now_s);
    }
    refresh_cough_state(now_s);
    return symptoms_;
  }

  // Reclassifies risk from the current symptom/contact/violation state and
  // returns the transition effects, including the automatic upload when the
  // level rises to high risk with consent already granted.
  std::vector<Effect> evaluate_risk(double now_s) {
    std::vector<Effect> effects;
    append_risk_effects(effects, now_s);
    return effects;
  }

  std::vector<Effect> apply_exposure_decision(const ExposureDecision& decision,
                                              double now_s) {
    std::vector<Effect> effects;
    if (decision.positive) {
      infected_contact_ = true;
    }
    append_risk_effects(effects, now_s);
    return effects;
  }

  // External diagnosis ("deemed infected"): upload own tags if permitted.
  std::vector<Effect> mark_infected(double now_s) {
    infected_ = true;
    std::vector<Effect> effects;
    if (can_upload() && !own_tags_.empty()) {
      effects.push_back(UploadReady{prepare_upload(consent_granted_, now_s)});
    }
    return effects;
  }

  UploadBundle prepare_upload(bool consent_given, double now_s) {
    if (config_.consent_required && !consent_given) {
      throw Error(ErrorCode::kConsentDenied, "upload requires user consent");
    }
    if (own_tags_.empty()) {
      throw Error(ErrorCode::kNothingToUpload, "tags table is empty");
    }
    own_tags_.back().active_until_s = std::max(own_tags_.back().active_until_s, now_s);
    UploadBundle bundle;
    double horizon = now_s - config_.retention_s;
    for (const auto& rec : own_tags_) {
      if (rec.active_until_s >= horizon) {
        bundle.entries.push_back({rec.tag, rec.active_from_s, rec.active_until_s});
      }
    }
    return bundle;
  }

  std::pair<std::size_t, std::size_t> prune(double now_s) {
    double horizon = now_s - config_.retention_s;
    std::size_t contacts_removed = 0;
    for (auto it = contacts_.begin(); it != contacts_.end();) {
      if (it->second.last_heard_s < horizon) {
        last_counted_violation_.erase(it->first);
        it = contacts_.erase(it);
        ++contacts_removed;
      } else {
        ++it;
      }
    }
    std::size_t tags_removed = 0;
    while (own_tags_.size() > 1 && own_tags_.front().active_until_s < horizon) {
      own_tags_.erase(own_tags_.begin());
      ++tags_removed;
    }
    return {contacts_removed, tags_removed};
  }

  std::vector<TagExposure> contact_exposures() const {
    std::vector<TagExposure> out;
    out.reserve(contacts_.size());
    for (const auto& [tag, rec] : contacts_) {
      out.push_back(TagExposure{tag, rec.exposure_s});
    }
    return out;
  }

  bool excessive_violations(double now_s) const {
    return counted_violations_in_window(now_s) >= config_.excessive_violation_count;
  }

  int counted_violations_in_window(double now_s) const {
    double horizon = now_s - config_.violation_window_s;
    int count = 0;
    for (double t : violation_times_) {
      if (t >= horizon) ++count;
    }
    return count;
  }

  const std::map<Tag, ContactRecord>& contacts() const { return contacts_; }
  const std::vector<OwnTagRecord>& own_tags() const { return own_tags_; }
  const DeviceConfig& config() const { return config_; }
  const PathLossModel& model() const { return model_; }
  SymptomState symptoms() const { return symptoms_; }
  RiskLevel risk() const { return risk_; }
  bool infected_contact() const { return infected_contact_; }
  bool infected() const { return infected_; }
  bool consent_granted() const { return consent_granted_; }

  // Snapshot for simulator checkpointing. Contains the device seed: this is a
  // local file format, never a wire message.
  nlohmann::ordered_json snapshot() const {
    nlohmann::ordered_json j;
    j["seed"] = seed_.hex();
    j["consent_granted"] = consent_granted_;
    j["config"] = config_json();
    j["model"] = model_to_json(model_);
    auto contacts_json = nlohmann::ordered_json::array();
    for (const auto& [tag, rec] : contacts_) {
      contacts_json.push_back({{"tag", tag.hex()},
                               {"first_heard_s", rec.first_heard_s},
                               {"last_heard_s", rec.last_heard_s},
                               {"exposure_s", rec.exposure_s},
                               {"min_distance_m", rec.min_distance_m}});
    }
    j["contacts"] = std::move(contacts_json);
    auto tags_json = nlohmann::ordered_json::array();
    for (const auto& rec : own_tags_) {
      tags_json.push_back({{"tag", rec.tag.hex()},
                           {"epoch", rec.epoch},
                           {"active_from_s", rec.active_from_s},
                           {"active_until_s", rec.active_until_s}});
    }
    j["own_tags"] = std::move(tags_json);
    j["violation_times_s"] = violation_times_;
    auto debounce_json = nlohmann::ordered_json::array();
    for (const auto& [tag, t] : last_counted_violation_) {
      debounce_json.push_back({{"tag", tag.hex()}, {"t_s", t}});
    }
    j["last_counted_violation"] = std::move(debounce_json);
    j["cough_times_s"] = cough_times_;
    j["last_temperature_c"] = last_temperature_c_;
    j["last_spo2_pct"] = last_spo2_pct_;
    j["symptoms"] = {{"fever", symptoms_.fever},
                     {"low_spo2", symptoms_.low_spo2},
                     {"excessive_cough", symptoms_.excessive_cough}};
    j["risk"] = static_cast<int>(risk_);
    j["infected_contact"] = infected_contact_;
    j["infected"] = infected_;
    return j;
  }

  static DeviceState restore(const nlohmann::json& j) {
    try {
      DeviceSeed seed = DeviceSeed::from_hex(j.at("seed").get<std::string>());
      DeviceConfig config = config_from_json(j.at("config"), DeviceConfig{});
      PathLossModel model = model_from_json(j.at("model"));
      DeviceState device(seed, config, model, j.at("consent_granted").get<bool>());
      for (const auto& c : j.at("contacts")) {
        ContactRecord rec;
        rec.tag = Tag::from_hex(c.at("tag").get<std::string>());
        rec.first_heard_s = c.at("first_heard_s").get<double>();
        rec.last_heard_s = c.at("last_heard_s").get<double>();
        rec.exposure_s = c.at("exposure_s").get<double>();
        rec.min_distance_m = c.at("min_distance_m").get<double>();
        device.contacts_[rec.tag] = rec;
      }
      for (const auto& t : j.at("own_tags")) {
        OwnTagRecord rec;
        rec.tag = Tag::from_hex(t.at("tag").get<std::string>());
        rec.epoch = t.at("epoch").get<EpochIndex>();
        rec.active_from_s = t.at("active_from_s").get<double>();
        rec.active_until_s = t.at("active_until_s").get<double>();
        device.own_tags_.push_back(rec);
      }
      if (!device.own_tags_.empty()) {
        device.current_address_ = derive_address(seed, device.own_tags_.back().epoch);
      }
      device.violation_times_.assign(j.at("violation_times_s").begin(),
                                     j.at("violation_times_s").end());
      for (const auto& d : j.at("last_counted_violation")) {
        device.last_counted_violation_[Tag::from_hex(d.at("tag").get<std::string>())] =
            d.at("t_s").get<double>();
      }
      device.cough_times_.assign(j.at("cough_times_s").begin(), j.at("cough_times_s").end());
      device.last_temperature_c_ = j.at("last_temperature_c").get<double>();
      device.last_spo2_pct_ = j.at("last_spo2_pct").get<double>();
      const auto& symptoms = j.at("symptoms");
      device.symptoms_.fever = symptoms.at("fever").get<bool>();
      device.symptoms_.low_spo2 = symptoms.at("low_spo2").get<bool>();
      device.symptoms_.excessive_cough = symptoms.at("excessive_cough").get<bool>();
      device.risk_ = risk_level_from_value(j.at("risk").get<std::uint8_t>());
      device.infected_contact_ = j.at("infected_contact").get<bool>();
      device.infected_ = j.at("infected").get<bool>();
      return device;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kValidation, std::string("bad device snapshot: ") + e.what());
    }
  }

  static DeviceConfig config_from_json(const nlohmann::json& j, DeviceConfig base) {
    DeviceConfig config = base;
    config.epoch_length_s = j.value("epoch_length_s", config.epoch_length_s);
    config.contact_gap_s = j.value("contact_gap_s", config.contact_gap_s);
    config.violation_threshold_m = j.value("violation_threshold_m", config.violation_threshold_m);
    config.violation_debounce_s = j.value("violation_debounce_s", config.violation_debounce_s);
    config.excessive_violation_count =
        j.value("excessive_violation_count", config.excessive_violation_count);
    config.violation_window_s = j.value("violation_window_s", config.violation_window_s);
    config.cough_rate_threshold = j.value("cough_rate_threshold", config.cough_rate_threshold);
    config.cough_window_s = j.value("cough_window_s", config.cough_window_s);
    config.retention_s = j.value("retention_s", config.retention_s);
    config.tx_power_dbm = static_cast<std::int8_t>(j.value("tx_power_dbm", static_cast<int>(config.tx_power_dbm)));
    config.auto_upload_on_high_risk =
        j.value("auto_upload_on_high_risk", config.auto_upload_on_high_risk);
    config.consent_required = j.value("consent_required", config.consent_required);
    config.validate();
    return config;
  }

 private:
  void open_record(EpochIndex epoch, double from_s) {
    OwnTagRecord rec;
    rec.tag = derive_tag(seed_, epoch);
    rec.epoch = epoch;
    rec.active_from_s = from_s;
    rec.active_until_s = from_s;
    own_tags_.push_back(rec);
    current_address_ = derive_address(seed_, epoch);
  }

  void refresh_cough_state(double now_s) {
    double horizon = now_s - config_.cough_window_s;
    while (!cough_times_.empty() && cough_times_.front() < horizon) {
      cough_times_.pop_front();
    }
    symptoms_.excessive_cough =
        static_cast<int>(cough_times_.size()) >= config_.cough_rate_threshold;
  }

  bool can_upload() const { return !config_.consent_required || consent_granted_; }

  void append_risk_effects(std::vector<Effect>& effects, double now_s) {
    refresh_cough_state(now_s);
    RiskLevel next = classify_risk(symptoms_.abnormal(), infected_contact_,
                                   excessive_violations(now_s));
    if (next == risk_) return;
    RiskLevel previous = risk_;
    risk_ = next;
    effects.push_back(RiskChanged{previous, next});
    if (next == RiskLevel::kHighRisk && config_.auto_upload_on_high_risk &&
        can_upload() && !own_tags_.empty()) {
      effects.push_back(UploadReady{prepare_upload(consent_granted_, now_s)});
    }
  }

  nlohmann::ordered_json config_json() const {
    return nlohmann::ordered_json{
        {"epoch_length_s", config_.epoch_length_s},
        {"contact_gap_s", config_.contact_gap_s},
        {"violation_threshold_m", config_.violation_threshold_m},
        {"violation_debounce_s", config_.violation_debounce_s},
        {"excessive_violation_count", config_.excessive_violation_count},
        {"violation_window_s", config_.violation_window_s},
        {"cough_rate_threshold", config_.cough_rate_threshold},
        {"cough_window_s", config_.cough_window_s},
        {"retention_s", config_.retention_s},
        {"tx_power_dbm", static_cast<int>(config_.tx_power_dbm)},
        {"auto_upload_on_high_risk", config_.auto_upload_on_high_risk},
        {"consent_required", config_.consent_required}};
  }

  DeviceSeed seed_;
  DeviceConfig config_;
  PathLossModel model_;
  bool consent_granted_ = false;

  std::map<Tag, ContactRecord> contacts_;
  std::vector<OwnTagRecord> own_tags_;
  BeaconAddress current_address_;
  std::vector<double> violation_times_;
  std::map<Tag, double> last_counted_violation_;
  std::deque<double> cough_times_;
  double last_temperature_c_ = 36.6;
  double last_spo2_pct_ = 98.0;
  SymptomState symptoms_;
  RiskLevel risk_ = RiskLevel::kNoRisk;
  bool infected_contact_ = false;
  bool infected_ = false;
};

}  // namespace bracelet

#endif  // BRACELET_DEVICE_HPP_

#pragma once

#include <optional>

#include <json.hpp>

#include "cmr/diagnosis.hpp"
#include "cmr/metrics.hpp"

namespace cmr::detail {

using json = nlohmann::ordered_json;

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json metrics_json(const std::vector<ClassMetrics>& ms) {
  json out = json::array();
  for (const auto& m : ms) {
    json e;
    e["class"] = m.name;
    e["dice"] = m.dice.value;
    e["jaccard"] = m.jaccard.value;
    e["both_empty"] = m.dice.both_empty;
    e["hd_mm"] = opt(m.hd_mm);
    e["tpr"] = opt(m.rates.tpr);
    e["spc"] = opt(m.rates.spc);
    e["ppv"] = opt(m.rates.ppv);
    e["npv"] = opt(m.rates.npv);
    e["tp"] = m.counts.tp;
    e["fp"] = m.counts.fp;
    e["tn"] = m.counts.tn;
    e["fn"] = m.counts.fn;
    out.push_back(std::move(e));
  }
  return out;
}

inline json prediction_json(const Prediction& p) {
  json j;
  j["label"] = std::string(disease_name(p.label));
  j["stage1"] = std::string(disease_name(p.stage1));
  json votes = json::array();
  for (const auto& v : p.votes) votes.push_back({{"member", v.name}, {"label", std::string(disease_name(v.label))}});
  j["votes"] = std::move(votes);
  j["tie"] = p.tie;
  j["stage2_fired"] = p.stage2_fired;
  j["expert_label"] = p.expert_label ? json(std::string(disease_name(*p.expert_label))) : json(nullptr);
  return j;
}

}  // namespace cmr::detail

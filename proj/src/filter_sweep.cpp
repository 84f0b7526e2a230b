#include "pol/filter_sweep.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "pol/signal_filters.hpp"

namespace pol {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + what + ": '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) {
    throw ConfigError("bad number for " + what + ": '" + s + "'");
  }
  return v;
}

const std::set<std::string>& smoother_keys() {
  static const std::set<std::string> keys{"ma_window",   "alpha",        "dma_max_window",
                                          "dma_threshold", "gauss_sigma", "gauss_window",
                                          "median_window", "kalman_q",    "kalman_r"};
  return keys;
}

}  // namespace

std::vector<TraceRow> parse_rssi_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TraceError("empty trace");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "tick,receiver,sender,rssi_raw,rssi_smoothed") {
    throw TraceError("line 1: unexpected header '" + line + "'");
  }
  std::vector<TraceRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split(line, ',');
    if (f.size() != 5) throw TraceError("line " + std::to_string(lineno) + ": expected 5 fields");
    try {
      TraceRow r;
      r.tick = static_cast<Tick>(std::stoll(f[0]));
      r.receiver = NodeId::parse(f[1]);
      r.sender = NodeId::parse(f[2]);
      r.raw = to_double(f[3], "rssi_raw");
      r.smoothed = to_double(f[4], "rssi_smoothed");
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw TraceError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<TraceRow> read_rssi_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace " + path.string());
  return parse_rssi_csv(in);
}

std::vector<TraceEvent> events_from_metrics(const json& metrics) {
  std::vector<TraceEvent> out;
  try {
    for (const auto& m : metrics.value("movements", json::array())) {
      out.push_back({NodeId::parse(m.at("node").get<std::string>()), m.at("at").get<Tick>(), 60});
    }
    for (const auto& a : metrics.value("attacks", json::array())) {
      out.push_back({NodeId::parse(a.at("victim").get<std::string>()), a.at("at").get<Tick>(), 120});
    }
  } catch (const std::exception& e) {
    throw TraceError(std::string("bad metrics document: ") + e.what());
  }
  return out;
}

std::vector<double> parse_threshold_sweep(const std::string& spec) {
  auto f = split(spec, ':');
  if (f.size() != 3) throw ConfigError("threshold sweep must be LO:HI:STEP");
  double lo = to_double(f[0], "LO");
  double hi = to_double(f[1], "HI");
  double step = to_double(f[2], "STEP");
  if (!(step > 0.0) || hi < lo || !(lo > 0.0)) {
    throw ConfigError("threshold sweep needs 0 < LO <= HI and STEP > 0");
  }
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    double v = lo + static_cast<double>(i) * step;
    if (v > hi + step / 2.0) break;
    out.push_back(v);
  }
  return out;
}

SweepResult sweep_filters(const std::vector<TraceRow>& trace, const SweepConfig& config) {
  FilterParams defaults;
  json smoother_params = json::object();
  double threshold = defaults.threshold;
  Tick cooldown = defaults.cooldown;
  std::size_t warmup = defaults.warmup;
  if (!config.params.is_object()) throw ConfigError("filter parameters must be a JSON object");
  for (const auto& [k, v] : config.params.items()) {
    try {
      if (k == "threshold") threshold = v.get<double>();
      else if (k == "cooldown") cooldown = v.get<Tick>();
      else if (k == "warmup") warmup = v.get<std::size_t>();
      else if (smoother_keys().contains(k)) smoother_params[k] = v;
      else throw ConfigError("unknown filter parameter '" + k + "'");
    } catch (const json::exception& e) {
      throw ConfigError("bad filter parameter '" + k + "': " + e.what());
    }
  }
  std::vector<double> thresholds = config.thresholds;
  if (thresholds.empty()) thresholds.push_back(threshold);
  for (double t : thresholds) TriggerState check(t, cooldown);

  auto in_window = [&](Tick t) {
    for (const auto& e : config.events) {
      if (t > e.at && t <= e.at + e.window) return true;
    }
    return false;
  };

  SweepResult result;
  for (const auto& name : config.filters) {
    auto prototype = make_smoother(name, smoother_params);

    std::map<std::pair<NodeId, NodeId>, std::unique_ptr<Smoother>> filters;
    auto& column = result.smoothed[name];
    column.reserve(trace.size());
    for (const auto& r : trace) {
      auto& f = filters[{r.receiver, r.sender}];
      if (!f) f = prototype->clone();
      column.push_back(f->step(r.raw));
    }

    for (double t : thresholds) {
      SweepRow row{name, t, 0, 0, {}};
      std::map<std::pair<NodeId, NodeId>, std::pair<TriggerState, std::size_t>> triggers;
      std::map<std::pair<NodeId, NodeId>, std::vector<Tick>> fires;
      for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& r = trace[i];
        auto key = std::make_pair(r.receiver, r.sender);
        auto it = triggers.try_emplace(key, TriggerState(t, cooldown), 0).first;
        auto& [state, samples] = it->second;
        ++samples;
        if (samples < warmup) continue;
        if (bft_trigger(state, Rssi::clamped(column[i]), r.tick)) {
          ++row.triggers;
          if (!in_window(r.tick)) ++row.static_false_positives;
          fires[key].push_back(r.tick);
        }
      }
      for (const auto& e : config.events) {
        if (e.window != 60) continue;
        DetectionStat d{e.node, e.at, 0, 0, std::nullopt, std::nullopt};
        double sum = 0.0;
        for (const auto& [key, _] : triggers) {
          if (key.first != e.node && key.second != e.node) continue;
          ++d.links_total;
          for (Tick f : fires[key]) {
            if (f > e.at && f <= e.at + e.window) {
              Tick lat = f - e.at;
              ++d.links_detected;
              sum += static_cast<double>(lat);
              d.max_latency = std::max(d.max_latency.value_or(0), lat);
              break;
            }
          }
        }
        if (d.links_detected) d.mean_latency = sum / static_cast<double>(d.links_detected);
        row.detections.push_back(d);
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

json sweep_report(const SweepConfig& config, const SweepResult& result) {
  json rows = json::array();
  for (const auto& r : result.rows) {
    json det = json::array();
    for (const auto& d : r.detections) {
      det.push_back({{"node", d.node.str()},
                     {"at", d.at},
                     {"links_total", d.links_total},
                     {"links_detected", d.links_detected},
                     {"max_latency", d.max_latency ? json(*d.max_latency) : json(nullptr)},
                     {"mean_latency", d.mean_latency ? json(*d.mean_latency) : json(nullptr)}});
    }
    rows.push_back({{"filter", r.filter},
                    {"threshold", r.threshold},
                    {"triggers", r.triggers},
                    {"static_false_positives", r.static_false_positives},
                    {"detections", det}});
  }
  json events = json::array();
  for (const auto& e : config.events) {
    events.push_back({{"node", e.node.str()}, {"at", e.at}, {"window", e.window}});
  }
  return json{{"report_version", 1},
              {"filters", config.filters},
              {"params", config.params},
              {"events", events},
              {"rows", rows}};
}

std::string sweep_csv(const std::vector<TraceRow>& trace, const SweepConfig& config,
                      const SweepResult& result) {
  std::string out = "tick,receiver,sender,rssi_raw";
  for (const auto& f : config.filters) out += "," + f;
  out += '\n';
  char buf[64];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& r = trace[i];
    std::snprintf(buf, sizeof buf, "%lld,", static_cast<long long>(r.tick));
    out += buf;
    out += r.receiver.str() + "," + r.sender.str();
    std::snprintf(buf, sizeof buf, ",%.4f", r.raw);
    out += buf;
    for (const auto& f : config.filters) {
      std::snprintf(buf, sizeof buf, ",%.4f", result.smoothed.at(f)[i]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace pol

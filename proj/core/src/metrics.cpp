#include "cimpc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cimpc {

namespace {

void timing_stats(const std::vector<double>& v, double& mean, double& max) {
  mean = 0.0;
  max = 0.0;
  if (v.empty()) return;
  for (double x : v) {
    mean += x;
    max = std::max(max, x);
  }
  mean /= static_cast<double>(v.size());
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

SlippageResult slippage_metric(const std::vector<ContactSample>& samples, double c, double gate) {
  if (!(c < 0.0)) throw ConfigError("slippage scale c must be negative");
  if (!(gate > 0.0)) throw ConfigError("slippage gate must be positive");
  SlippageResult r;
  double sum = 0.0;
  for (const auto& s : samples) {
    if (!(s.phi < gate)) continue;
    sum += sigmoid(c * s.phi) * s.slip_sq;
    ++r.samples;
  }
  if (r.samples > 0) {
    r.value = sum / static_cast<double>(r.samples);
    r.empty = false;
  }
  return r;
}

ContactTimeline contact_timeline(const std::vector<double>& t,
                                 const std::vector<std::vector<double>>& phi,
                                 const std::vector<PairId>& pairs, double threshold) {
  if (phi.size() != t.size()) throw DimensionError("contact_timeline: phi rows != times");
  ContactTimeline tl;
  tl.pairs = pairs;
  tl.breaks.assign(pairs.size(), 0);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    bool in = false;
    double start = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (phi[k].size() != pairs.size()) throw DimensionError("contact_timeline: phi columns");
      const bool now = phi[k][p] < threshold;
      if (now && !in) start = t[k];
      if (!now && in) {
        tl.intervals.push_back({pairs[p], start, t[k]});
        ++tl.breaks[p];
      }
      in = now;
    }
    if (in && !t.empty()) tl.intervals.push_back({pairs[p], start, t.back()});
  }
  return tl;
}

MetricsReport compute_metrics(const RunLog& log, const MetricsConfig& cfg) {
  MetricsReport r;
  r.aborted = log.aborted;
  r.wall_time = log.wall_time;
  r.slippage = slippage_metric(log.contacts, cfg.slip_c, cfg.slip_gate);
  const std::size_t K = log.t.size();
  if (K >= 2) {
    const double dt = log.t.back() - log.t.front();
    r.avg_rotation_speed = (log.q.back()[log.q.back().size() - 1] -
                            log.q.front()[log.q.front().size() - 1]) / dt;
  }
  if (K > 0) {
    double js = 0.0;
    double jt = 0.0;
    double ot = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      js += log.qdot[k].head(log.n_r).cwiseAbs().mean();
      jt += (log.q[k].head(log.n_r) - log.q_d[k]).squaredNorm() / log.n_r;
      ot += std::abs(log.q[k][log.q[k].size() - 1] - log.q_o_ref[k][log.q_o_ref[k].size() - 1]);
    }
    r.avg_joint_speed = js / static_cast<double>(K);
    r.joint_tracking_rms = std::sqrt(jt / static_cast<double>(K));
    r.object_tracking_mean = ot / static_cast<double>(K);
  }

  // per-tick phi series over every pair seen in the log
  std::map<PairId, std::size_t> index;
  for (const auto& c : log.contacts) index.emplace(c.pair, 0);
  std::vector<PairId> pairs;
  for (auto& [p, i] : index) {
    i = pairs.size();
    pairs.push_back(p);
  }
  std::vector<std::vector<double>> phi(K, std::vector<double>(pairs.size(),
                                                               std::numeric_limits<double>::infinity()));
  for (const auto& c : log.contacts) {
    if (c.tick >= 0 && static_cast<std::size_t>(c.tick) < K) phi[c.tick][index[c.pair]] = c.phi;
  }
  r.timeline = contact_timeline(log.t, phi, pairs, cfg.contact_phi);

  std::vector<double> mt;
  for (const auto& m : log.mpc) mt.push_back(m.solve_time);
  timing_stats(mt, r.mpc_solve_mean, r.mpc_solve_max);
  timing_stats(log.ctrl_solve_time, r.ctrl_solve_mean, r.ctrl_solve_max);
  return r;
}

std::vector<double> object_tracking_error(const PlannerLog& log) {
  std::vector<double> e;
  e.reserve(log.q.size());
  for (std::size_t k = 0; k < log.q.size(); ++k) {
    const auto n = log.q[k].size();
    e.push_back(std::abs(log.q[k][n - 1] - log.q_o_ref[k][log.q_o_ref[k].size() - 1]));
  }
  return e;
}

MetricsReport compute_metrics(const PlannerLog& log, const MetricsConfig& cfg) {
  MetricsReport r;
  r.aborted = log.aborted;
  const std::size_t K = log.q.size();
  if (K >= 2) {
    const double dt = log.t.back() - log.t.front();
    r.avg_rotation_speed =
        (log.q.back()[log.q.back().size() - 1] - log.q.front()[log.q.front().size() - 1]) / dt;
    const int nr = static_cast<int>(log.u.empty() ? 0 : log.u.front().size());
    double js = 0.0;
    for (std::size_t k = 1; k < K; ++k) {
      js += ((log.q[k].head(nr) - log.q[k - 1].head(nr)) / (log.t[k] - log.t[k - 1]))
                .cwiseAbs()
                .mean();
    }
    r.avg_joint_speed = nr > 0 ? js / static_cast<double>(K - 1) : 0.0;
  }
  const auto err = object_tracking_error(log);
  if (!err.empty()) {
    double s = 0.0;
    for (double x : err) s += x;
    r.object_tracking_mean = s / static_cast<double>(err.size());
  }
  r.timeline = contact_timeline(log.t, log.phi, log.pairs, cfg.contact_phi);
  std::vector<double> mt;
  for (const auto& m : log.mpc) mt.push_back(m.solve_time);
  timing_stats(mt, r.mpc_solve_mean, r.mpc_solve_max);
  for (double x : mt) r.wall_time += x;
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["avg_slippage"] = r.slippage.value;
  j["slippage_samples"] = r.slippage.samples;
  j["slippage_empty"] = r.slippage.empty;
  j["avg_rotation_speed"] = r.avg_rotation_speed;
  j["avg_joint_speed"] = r.avg_joint_speed;
  j["joint_tracking_rms"] = r.joint_tracking_rms;
  j["object_tracking_mean"] = r.object_tracking_mean;
  nlohmann::json tl = nlohmann::json::array();
  for (std::size_t p = 0; p < r.timeline.pairs.size(); ++p) {
    nlohmann::json intervals = nlohmann::json::array();
    for (const auto& iv : r.timeline.intervals) {
      if (iv.pair == r.timeline.pairs[p]) intervals.push_back({iv.t_start, iv.t_end});
    }
    tl.push_back({{"a", r.timeline.pairs[p].a},
                  {"b", r.timeline.pairs[p].b},
                  {"breaks", r.timeline.breaks[p]},
                  {"intervals", intervals}});
  }
  j["contact_timeline"] = tl;
  j["timing"] = {{"mpc_solve_mean", r.mpc_solve_mean},
                 {"mpc_solve_max", r.mpc_solve_max},
                 {"ctrl_solve_mean", r.ctrl_solve_mean},
                 {"ctrl_solve_max", r.ctrl_solve_max},
                 {"wall_time", r.wall_time}};
  j["aborted"] = r.aborted;
  return j;
}

}  // namespace cimpc

#include "cimpc/io.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace cimpc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw Error("bad number '" + s + "' in CSV");
  return v;
}

void indexed(std::vector<std::string>& cols, const std::string& stem, int n) {
  for (int i = 0; i < n; ++i) cols.push_back(stem + "_" + std::to_string(i));
}

void append(std::vector<double>& row, const VectorXd& v) {
  row.insert(row.end(), v.data(), v.data() + v.size());
}

VectorXd read_block(const std::vector<std::string>& row, std::size_t start, int n) {
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = parse_double(row[start + static_cast<std::size_t>(i)]);
  return v;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size()), path_(path) {
  if (!out_) throw Error("cannot write " + path);
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) {
    throw DimensionError(path_ + ": row has " + std::to_string(fields.size()) + " fields, header " +
                         std::to_string(columns_));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_escape(fields[i]);
  }
  out_ << "\r\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> f;
  f.reserve(values.size());
  for (double v : values) f.push_back(format_double(v));
  row(f);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error("CSV column '" + name + "' not found");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      rec.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        rec.push_back(std::move(field));
        records.push_back(std::move(rec));
      }
      field.clear();
      rec.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(path + ": unterminated quoted field");
  if (any || !field.empty()) {
    rec.push_back(std::move(field));
    records.push_back(std::move(rec));
  }
  CsvTable t;
  if (records.empty()) return t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw Error(path + ": record " + std::to_string(r) + " has wrong field count");
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(path + " is not valid JSON");
  return j;
}

std::vector<std::string> trajectory_columns(int n_r, int n_o) {
  std::vector<std::string> c{"t"};
  indexed(c, "q", n_r + n_o);
  indexed(c, "qdot", n_r + n_o);
  indexed(c, "q_d", n_r);
  indexed(c, "qd_dot", n_r);
  indexed(c, "q_o_ref", n_o);
  return c;
}

std::vector<std::string> contact_columns() {
  return {"tick", "t", "pair_a", "pair_b", "phi", "slip_sq",
          "f_meas_x", "f_meas_y", "f_meas_z", "f_ref_x", "f_ref_y", "f_ref_z"};
}

std::vector<std::string> controller_columns(int n_r) {
  std::vector<std::string> c{"t"};
  indexed(c, "xi", n_r);
  indexed(c, "xi_d", n_r);
  indexed(c, "u0", n_r);
  c.push_back("solve_time");
  return c;
}

std::string output_root() {
  const char* env = std::getenv("CIMPC_OUTPUT_ROOT");
  return env && *env ? std::string(env) : std::string("runs");
}

json manifest(const Scenario& sc, const std::string& kind) {
  json m;
  m["name"] = sc.name;
  m["kind"] = kind;
  m["config_hash"] = sc.config_hash();
  m["seed"] = sc.seed;
  m["scenario_path"] = sc.path;
  m["model_path"] = sc.model_path;
  m["scenario"] = sc.raw;
  return m;
}

void write_run_log(const std::string& dir, const RunLog& log, const Scenario& sc,
                   const MetricsReport& metrics) {
  fs::create_directories(dir);
  const int nr = log.n_r;
  const int no = log.n_o;
  {
    CsvWriter w(dir + "/trajectory.csv", trajectory_columns(nr, no));
    for (std::size_t k = 0; k < log.t.size(); ++k) {
      std::vector<double> r{log.t[k]};
      append(r, log.q[k]);
      append(r, log.qdot[k]);
      append(r, log.q_d[k]);
      append(r, log.qd_dot[k]);
      append(r, log.q_o_ref[k]);
      w.row(r);
    }
  }
  {
    CsvWriter w(dir + "/contacts.csv", contact_columns());
    for (const auto& c : log.contacts) {
      w.row(std::vector<double>{static_cast<double>(c.tick), c.t, static_cast<double>(c.pair.a),
                                static_cast<double>(c.pair.b), c.phi, c.slip_sq,
                                c.f_measured.x(), c.f_measured.y(), c.f_measured.z(),
                                c.f_ref.x(), c.f_ref.y(), c.f_ref.z()});
    }
  }
  {
    CsvWriter w(dir + "/controller.csv", controller_columns(nr));
    for (std::size_t k = 0; k < log.t.size(); ++k) {
      std::vector<double> r{log.t[k]};
      append(r, log.q[k].head(nr));
      append(r, log.q_d[k]);
      append(r, log.u0[k]);
      r.push_back(log.ctrl_solve_time[k]);
      w.row(r);
    }
  }
  json timing = json::array();
  for (const auto& m : log.mpc) {
    timing.push_back({{"step", m.step},
                      {"t", m.t},
                      {"iterations", m.iterations},
                      {"solve_time", m.solve_time},
                      {"cost", m.cost},
                      {"converged", m.converged}});
  }
  write_json(dir + "/mpc_timing.json", timing);
  write_json(dir + "/metrics.json", to_json(metrics));

  json m = manifest(sc, log.kind);
  m["n_r"] = nr;
  m["n_o"] = no;
  m["dt_sim"] = log.dt_sim;
  m["sim_steps"] = log.sim_steps;
  m["controller_calls"] = log.ctrl_at.size();
  m["mpc_calls"] = log.mpc_at.size();
  m["aborted"] = log.aborted;
  m["abort_reason"] = log.abort_reason;
  m["wall_time"] = log.wall_time;
  m["files"] = {"trajectory.csv", "contacts.csv", "controller.csv", "mpc_timing.json",
                "metrics.json"};
  write_json(dir + "/manifest.json", m);
}

RunLog read_run_log(const std::string& dir) {
  const json m = read_json(dir + "/manifest.json");
  RunLog log;
  try {
    log.kind = m.at("kind").get<std::string>();
    log.n_r = m.at("n_r").get<int>();
    log.n_o = m.at("n_o").get<int>();
    log.dt_sim = m.at("dt_sim").get<double>();
    log.sim_steps = m.at("sim_steps").get<long>();
    log.aborted = m.at("aborted").get<bool>();
    log.abort_reason = m.at("abort_reason").get<std::string>();
    log.wall_time = m.at("wall_time").get<double>();
  } catch (const json::exception& e) {
    throw Error(dir + "/manifest.json: " + e.what());
  }
  const int nr = log.n_r;
  const int no = log.n_o;
  const int nq = nr + no;

  const CsvTable traj = read_csv(dir + "/trajectory.csv");
  if (traj.header != trajectory_columns(nr, no)) throw Error(dir + "/trajectory.csv: unexpected columns");
  for (const auto& r : traj.rows) {
    std::size_t at = 0;
    log.t.push_back(parse_double(r[at++]));
    log.q.push_back(read_block(r, at, nq));
    at += static_cast<std::size_t>(nq);
    log.qdot.push_back(read_block(r, at, nq));
    at += static_cast<std::size_t>(nq);
    log.q_d.push_back(read_block(r, at, nr));
    at += static_cast<std::size_t>(nr);
    log.qd_dot.push_back(read_block(r, at, nr));
    at += static_cast<std::size_t>(nr);
    log.q_o_ref.push_back(read_block(r, at, no));
  }

  const CsvTable ctl = read_csv(dir + "/controller.csv");
  if (ctl.header != controller_columns(nr)) throw Error(dir + "/controller.csv: unexpected columns");
  for (const auto& r : ctl.rows) {
    log.u0.push_back(read_block(r, 1 + 2 * static_cast<std::size_t>(nr), nr));
    log.ctrl_solve_time.push_back(parse_double(r.back()));
  }

  const CsvTable con = read_csv(dir + "/contacts.csv");
  if (con.header != contact_columns()) throw Error(dir + "/contacts.csv: unexpected columns");
  for (const auto& r : con.rows) {
    ContactSample c;
    c.tick = static_cast<int>(parse_double(r[0]));
    c.t = parse_double(r[1]);
    c.pair = {static_cast<int>(parse_double(r[2])), static_cast<int>(parse_double(r[3]))};
    c.phi = parse_double(r[4]);
    c.slip_sq = parse_double(r[5]);
    c.f_measured = Vector3d(parse_double(r[6]), parse_double(r[7]), parse_double(r[8]));
    c.f_ref = Vector3d(parse_double(r[9]), parse_double(r[10]), parse_double(r[11]));
    log.contacts.push_back(c);
  }

  for (const auto& e : read_json(dir + "/mpc_timing.json")) {
    MpcTiming t;
    t.step = e.at("step").get<int>();
    t.t = e.at("t").get<double>();
    t.iterations = e.at("iterations").get<int>();
    t.solve_time = e.at("solve_time").get<double>();
    t.cost = e.at("cost").get<double>();
    t.converged = e.at("converged").get<bool>();
    log.mpc.push_back(t);
  }
  return log;
}

void write_planner_log(const std::string& path, const PlannerLog& log) {
  if (log.q.empty()) throw Error("empty planner log");
  const int nq = static_cast<int>(log.q.front().size());
  const int no = static_cast<int>(log.q_o_ref.front().size());
  const int nr = nq - no;
  std::vector<std::string> cols{"step", "t"};
  indexed(cols, "q", nq);
  indexed(cols, "u", nr);
  indexed(cols, "q_o_ref", no);
  for (const auto& p : log.pairs) {
    cols.push_back("phi_" + std::to_string(p.a) + "_" + std::to_string(p.b));
  }
  cols.push_back("cost");
  cols.push_back("iterations");
  cols.push_back("solve_time");
  CsvWriter w(path, cols);
  for (std::size_t k = 0; k < log.q.size(); ++k) {
    std::vector<double> r{static_cast<double>(k), log.t[k]};
    append(r, log.q[k]);
    if (k < log.u.size()) {
      append(r, log.u[k]);
    } else {
      append(r, VectorXd::Constant(nr, std::numeric_limits<double>::quiet_NaN()));
    }
    append(r, log.q_o_ref[k]);
    r.insert(r.end(), log.phi[k].begin(), log.phi[k].end());
    const bool has = k < log.mpc.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.push_back(has ? log.mpc[k].cost : nan);
    r.push_back(has ? log.mpc[k].iterations : nan);
    r.push_back(has ? log.mpc[k].solve_time : nan);
    w.row(r);
  }
}

}  // namespace cimpc

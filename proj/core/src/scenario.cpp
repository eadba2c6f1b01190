#include "gpufair/scenario.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gpufair {

namespace {

using nlohmann::json;

std::string line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return std::to_string(line);
}

[[noreturn]] void fail(const std::string& origin, const std::string& path,
                       const std::string& message) {
  throw ConfigInvalid(origin + ": " + (path.empty() ? "" : path + ": ") + message);
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& origin, const std::string& path) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) fail(origin, path, "unknown key '" + key + "'");
  }
}

const json& need(const json& obj, const char* key, const std::string& origin,
                 const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(origin, path, std::string("missing key '") + key + "'");
  return *it;
}

double num(const json& v, const std::string& origin, const std::string& path) {
  if (!v.is_number()) fail(origin, path, "expected a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& origin, const std::string& path) {
  if (!v.is_number_integer()) fail(origin, path, "expected an integer");
  return v.get<int>();
}

Vec number_array(const json& v, const std::string& origin, const std::string& path) {
  if (!v.is_array()) fail(origin, path, "expected an array of numbers");
  Vec out;
  for (const auto& e : v) out.push_back(num(e, origin, path));
  return out;
}

Rational parse_weight(const json& v, const std::string& origin, const std::string& path) {
  if (v.is_number()) return Rational::from_double(v.get<double>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) {
        return Rational::from_double(std::stod(s));
      }
      return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
    } catch (const std::exception&) {
      fail(origin, path, "weight '" + s + "' is not a positive rational");
    }
  }
  fail(origin, path, "weight must be a number or 'p/q' string");
}

Vec speedup_from_file(const std::filesystem::path& file, int row,
                      const std::string& origin, const std::string& path) {
  std::ifstream in(file);
  if (!in) fail(origin, path, "cannot open throughput file " + file.string());
  std::string line;
  int idx = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (idx++ < row) continue;
    Vec raw;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) raw.push_back(std::stod(cell));
    return SpeedupMatrix::normalize_throughput({raw}).row(0);
  }
  fail(origin, path, "throughput file has no row " + std::to_string(row));
}

ClusterSpec parse_cluster(const json& v, const std::string& origin) {
  const std::string path = "cluster";
  if (!v.is_object()) fail(origin, path, "expected an object");
  reject_unknown_keys(v, {"gpu_types", "capacities", "gpus_per_host", "hosts"}, origin,
                      path);
  ClusterSpec spec;
  for (const auto& e : need(v, "gpu_types", origin, path)) {
    if (!e.is_string()) fail(origin, path + ".gpu_types", "expected strings");
    spec.gpu_types.push_back(e.get<std::string>());
  }
  for (const auto& e : need(v, "capacities", origin, path)) {
    spec.capacities.push_back(integer(e, origin, path + ".capacities"));
  }
  if (v.contains("hosts")) {
    for (const auto& h : v["hosts"]) {
      reject_unknown_keys(h, {"gpu_type", "gpus_per_host", "count"}, origin,
                          path + ".hosts");
      HostGroup g;
      g.gpu_type = need(h, "gpu_type", origin, path + ".hosts").get<std::string>();
      g.gpus_per_host = integer(need(h, "gpus_per_host", origin, path + ".hosts"),
                                origin, path + ".hosts");
      g.host_count = integer(need(h, "count", origin, path + ".hosts"), origin,
                             path + ".hosts");
      spec.hosts.push_back(g);
    }
  } else {
    const int per_host =
        v.contains("gpus_per_host")
            ? integer(v["gpus_per_host"], origin, path + ".gpus_per_host")
            : 4;
    for (std::size_t j = 0; j < spec.gpu_types.size(); ++j) {
      if (spec.capacities[j] == 0) continue;
      if (spec.capacities[j] % per_host != 0) {
        fail(origin, path, "capacity of " + spec.gpu_types[j] +
                               " not divisible by gpus_per_host");
      }
      spec.hosts.push_back({spec.gpu_types[j], per_host, spec.capacities[j] / per_host});
    }
  }
  try {
    spec.validate();
  } catch (const Error& err) {
    fail(origin, path, err.what());
  }
  return spec;
}

std::vector<TenantProfile> parse_tenants(const json& v, const ClusterSpec& cluster,
                                         const std::filesystem::path& base_dir,
                                         const std::string& origin) {
  if (!v.is_array()) fail(origin, "tenants", "expected an array");
  std::vector<TenantProfile> tenants;
  std::size_t ti = 0;
  for (const auto& t : v) {
    const std::string tpath = "tenants[" + std::to_string(ti++) + "]";
    reject_unknown_keys(t, {"id", "weight", "job_types"}, origin, tpath);
    TenantProfile profile;
    profile.id = need(t, "id", origin, tpath).get<std::string>();
    profile.weight = t.contains("weight")
                         ? parse_weight(t["weight"], origin, tpath + ".weight")
                         : Rational(1, 1);
    int job_counter = 0;
    std::size_t jti = 0;
    for (const auto& jt : need(t, "job_types", origin, tpath)) {
      const std::string jtpath = tpath + ".job_types[" + std::to_string(jti++) + "]";
      reject_unknown_keys(jt, {"speedup", "throughput", "throughput_file", "row", "jobs"},
                          origin, jtpath);
      JobType type;
      const int sources = jt.contains("speedup") + jt.contains("throughput") +
                          jt.contains("throughput_file");
      if (sources != 1) {
        fail(origin, jtpath,
             "exactly one of speedup / throughput / throughput_file is required");
      }
      if (jt.contains("speedup")) {
        type.speedup = number_array(jt["speedup"], origin, jtpath + ".speedup");
      } else if (jt.contains("throughput")) {
        const Vec raw = number_array(jt["throughput"], origin, jtpath + ".throughput");
        type.speedup = SpeedupMatrix::normalize_throughput({raw}).row(0);
      } else {
        const int row = jt.contains("row") ? integer(jt["row"], origin, jtpath) : 0;
        type.speedup = speedup_from_file(
            base_dir / jt["throughput_file"].get<std::string>(), row, origin, jtpath);
      }
      if (type.speedup.size() != cluster.num_types()) {
        fail(origin, jtpath, "speedup row width does not match the cluster");
      }
      try {
        SpeedupMatrix::validate_row(type.speedup);
      } catch (const Error& err) {
        fail(origin, jtpath, err.what());
      }
      if (jt.contains("jobs")) {
        for (const auto& job : jt["jobs"]) {
          reject_unknown_keys(job, {"id", "iterations", "demand", "submit_round"}, origin,
                              jtpath + ".jobs");
          JobSpec spec;
          spec.id = job.contains("id")
                        ? job["id"].get<std::string>()
                        : profile.id + "-j" + std::to_string(job_counter);
          ++job_counter;
          spec.iterations =
              num(need(job, "iterations", origin, jtpath), origin, jtpath + ".iterations");
          spec.demand = job.contains("demand")
                            ? integer(job["demand"], origin, jtpath + ".demand")
                            : 1;
          spec.submit_round =
              job.contains("submit_round")
                  ? integer(job["submit_round"], origin, jtpath + ".submit_round")
                  : 0;
          type.jobs.push_back(std::move(spec));
        }
      }
      profile.job_types.push_back(std::move(type));
    }
    try {
      profile.validate(cluster.num_types());
    } catch (const Error& err) {
      fail(origin, tpath, err.what());
    }
    tenants.push_back(std::move(profile));
  }
  return tenants;
}

ContentionProfile parse_generator(const json& v, const std::string& origin) {
  const std::string path = "generator";
  reject_unknown_keys(v,
                      {"tenants", "mean_jobs_per_tenant", "mean_iterations",
                       "iterations_sigma", "max_demand", "multi_type_prob",
                       "arrival_spread_rounds", "target_contention", "speedup_rows"},
                      origin, path);
  ContentionProfile p;
  p.tenants = integer(need(v, "tenants", origin, path), origin, path + ".tenants");
  if (v.contains("mean_jobs_per_tenant")) p.mean_jobs_per_tenant = num(v["mean_jobs_per_tenant"], origin, path);
  if (v.contains("mean_iterations")) p.mean_iterations = num(v["mean_iterations"], origin, path);
  if (v.contains("iterations_sigma")) p.iterations_sigma = num(v["iterations_sigma"], origin, path);
  if (v.contains("max_demand")) p.max_demand = integer(v["max_demand"], origin, path);
  if (v.contains("multi_type_prob")) p.multi_type_prob = num(v["multi_type_prob"], origin, path);
  if (v.contains("arrival_spread_rounds")) p.arrival_spread_rounds = integer(v["arrival_spread_rounds"], origin, path);
  if (v.contains("target_contention")) p.target_contention = num(v["target_contention"], origin, path);
  if (v.contains("speedup_rows")) {
    for (const auto& row : v["speedup_rows"]) {
      p.speedup_rows_override.push_back(number_array(row, origin, path + ".speedup_rows"));
    }
  }
  return p;
}

std::string fmt(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

json cluster_to_json(const ClusterSpec& c) {
  json hosts = json::array();
  for (const auto& h : c.hosts) {
    hosts.push_back({{"gpu_type", h.gpu_type},
                     {"gpus_per_host", h.gpus_per_host},
                     {"count", h.host_count}});
  }
  return {{"gpu_types", c.gpu_types}, {"capacities", c.capacities}, {"hosts", hosts}};
}

json tenants_to_json(const std::vector<TenantProfile>& tenants) {
  json arr = json::array();
  for (const auto& t : tenants) {
    json types = json::array();
    for (const auto& jt : t.job_types) {
      json jobs = json::array();
      for (const auto& j : jt.jobs) {
        jobs.push_back({{"id", j.id},
                        {"iterations", j.iterations},
                        {"demand", j.demand},
                        {"submit_round", j.submit_round}});
      }
      types.push_back({{"speedup", jt.speedup}, {"jobs", jobs}});
    }
    arr.push_back({{"id", t.id},
                   {"weight_num", t.weight.num},
                   {"weight_den", t.weight.den},
                   {"job_types", types}});
  }
  return arr;
}

}  // namespace

ScenarioDocument parse_scenario(const std::string& text, const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ConfigInvalid(origin + ": line " + line_of(text, err.byte) + ": " +
                        err.what());
  }
  if (!root.is_object()) fail(origin, "", "scenario must be a JSON object");
  reject_unknown_keys(root, {"cluster", "tenants", "policy", "simulation", "generator",
                             "audit"},
                      origin, "");

  ScenarioDocument doc;
  doc.config.cluster = parse_cluster(need(root, "cluster", origin, ""), origin);
  doc.config.policy = [&] {
    const std::string name = need(root, "policy", origin, "").get<std::string>();
    try {
      return policy_from_name(name);
    } catch (const Error& err) {
      fail(origin, "policy", err.what());
    }
  }();

  const std::filesystem::path base_dir =
      std::filesystem::path(origin).has_parent_path()
          ? std::filesystem::path(origin).parent_path()
          : std::filesystem::path(".");
  if (root.contains("tenants")) {
    doc.config.tenants = parse_tenants(root["tenants"], doc.config.cluster, base_dir, origin);
  }

  if (root.contains("simulation")) {
    const json& s = root["simulation"];
    const std::string path = "simulation";
    reject_unknown_keys(
        s, {"round_length_seconds", "horizon", "seed", "context_switch_seconds"}, origin,
        path);
    if (s.contains("round_length_seconds")) {
      doc.config.round_length_seconds = num(s["round_length_seconds"], origin, path);
      if (doc.config.round_length_seconds <= 0) {
        fail(origin, path + ".round_length_seconds", "must be > 0");
      }
    }
    if (s.contains("horizon")) {
      doc.config.horizon = integer(s["horizon"], origin, path + ".horizon");
      if (doc.config.horizon < 1) fail(origin, path + ".horizon", "must be >= 1");
    }
    if (s.contains("seed")) {
      if (!s["seed"].is_number_unsigned()) fail(origin, path + ".seed", "expected a non-negative integer");
      doc.config.seed = s["seed"].get<std::uint64_t>();
    }
    if (s.contains("context_switch_seconds")) {
      doc.config.context_switch_seconds = num(s["context_switch_seconds"], origin, path);
    }
  }

  if (root.contains("generator")) {
    doc.config.generator = parse_generator(root["generator"], origin);
  }
  if (doc.config.tenants.empty() && doc.config.generator.tenants <= 0) {
    fail(origin, "tenants", "no tenants: provide tenant profiles or a generator");
  }

  if (root.contains("audit")) {
    const json& a = root["audit"];
    reject_unknown_keys(a, {"tolerance", "probe_sp", "sp_samples", "sp_seed"}, origin,
                        "audit");
    if (a.contains("tolerance")) doc.audit.tolerance = num(a["tolerance"], origin, "audit");
    if (a.contains("probe_sp")) {
      if (!a["probe_sp"].is_boolean()) fail(origin, "audit.probe_sp", "expected a boolean");
      doc.audit.probe_sp = a["probe_sp"].get<bool>();
    }
    if (a.contains("sp_samples")) doc.audit.sp_samples = integer(a["sp_samples"], origin, "audit");
    if (a.contains("sp_seed")) doc.audit.sp_seed = a["sp_seed"].get<std::uint64_t>();
  }
  return doc;
}

ScenarioDocument load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid(path + ": cannot open scenario file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str(), path);
}

std::uint64_t config_hash(const ScenarioDocument& doc) {
  json canon;
  canon["cluster"] = cluster_to_json(doc.config.cluster);
  canon["tenants"] = tenants_to_json(doc.config.tenants);
  canon["policy"] = policy_name(doc.config.policy);
  canon["simulation"] = {{"round_length_seconds", doc.config.round_length_seconds},
                         {"horizon", doc.config.horizon},
                         {"seed", doc.config.seed},
                         {"context_switch_seconds", doc.config.context_switch_seconds}};
  const auto& g = doc.config.generator;
  canon["generator"] = {{"tenants", g.tenants},
                        {"mean_jobs_per_tenant", g.mean_jobs_per_tenant},
                        {"mean_iterations", g.mean_iterations},
                        {"iterations_sigma", g.iterations_sigma},
                        {"max_demand", g.max_demand},
                        {"multi_type_prob", g.multi_type_prob},
                        {"arrival_spread_rounds", g.arrival_spread_rounds},
                        {"target_contention", g.target_contention},
                        {"speedup_rows", g.speedup_rows_override}};
  canon["audit"] = {{"tolerance", doc.audit.tolerance},
                    {"probe_sp", doc.audit.probe_sp},
                    {"sp_samples", doc.audit.sp_samples},
                    {"sp_seed", doc.audit.sp_seed}};
  const std::string s = canon.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string allocation_report_to_json(const AllocationReportDoc& doc,
                                      const AuditReport* audit) {
  json out;
  out["policy"] = doc.policy;
  out["cluster"] = {{"gpu_types", doc.gpu_types}, {"capacities", doc.capacities}};
  out["tenants"] = doc.tenant_ids;
  out["speedup_matrix"] = doc.speedup;
  out["allocation"] = doc.allocation;
  out["efficiency"] = doc.efficiency_vector;
  out["total_efficiency"] = doc.total_efficiency;
  if (audit) out["audit"] = json::parse(audit_report_to_json(*audit));
  return out.dump(2) + "\n";
}

AllocationReportDoc allocation_report_from_json(const std::string& text,
                                                const std::string& origin) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ConfigInvalid(origin + ": line " + line_of(text, err.byte) + ": " + err.what());
  }
  reject_unknown_keys(root,
                      {"policy", "cluster", "tenants", "speedup_matrix", "allocation",
                       "efficiency", "total_efficiency", "audit"},
                      origin, "");
  AllocationReportDoc doc;
  doc.policy = need(root, "policy", origin, "").get<std::string>();
  const json& cluster = need(root, "cluster", origin, "");
  for (const auto& t : need(cluster, "gpu_types", origin, "cluster")) {
    doc.gpu_types.push_back(t.get<std::string>());
  }
  for (const auto& c : need(cluster, "capacities", origin, "cluster")) {
    doc.capacities.push_back(integer(c, origin, "cluster.capacities"));
  }
  for (const auto& t : need(root, "tenants", origin, "")) {
    doc.tenant_ids.push_back(t.get<std::string>());
  }
  for (const auto& row : need(root, "speedup_matrix", origin, "")) {
    doc.speedup.push_back(number_array(row, origin, "speedup_matrix"));
  }
  for (const auto& row : need(root, "allocation", origin, "")) {
    doc.allocation.push_back(number_array(row, origin, "allocation"));
  }
  doc.efficiency_vector = number_array(need(root, "efficiency", origin, ""), origin, "efficiency");
  doc.total_efficiency = num(need(root, "total_efficiency", origin, ""), origin, "total_efficiency");
  if (doc.speedup.size() != doc.allocation.size() ||
      doc.speedup.size() != doc.tenant_ids.size()) {
    fail(origin, "", "speedup, allocation, and tenant list sizes disagree");
  }
  return doc;
}

std::string audit_report_to_json(const AuditReport& report) {
  json out;
  out["tolerance"] = report.tolerance;
  json checks = json::array();
  for (const auto& e : report.entries) {
    json c;
    c["property"] = e.property;
    c["holds"] = e.holds;
    c["worst_violation"] = e.worst_violation;
    if (e.inconclusive) c["inconclusive"] = true;
    if (!e.witness.empty()) c["witness"] = e.witness;
    if (e.witness_a >= 0) c["witness_a"] = e.witness_a;
    if (e.witness_b >= 0) c["witness_b"] = e.witness_b;
    if (!e.witness_vector.empty()) c["witness_vector"] = e.witness_vector;
    checks.push_back(c);
  }
  out["checks"] = checks;
  return out.dump(2) + "\n";
}

std::string timeline_csv(const SimulationReport& report, const std::string& policy) {
  std::string out = "round,tenant,policy,normalized_throughput\n";
  for (const auto& row : report.timeline) {
    out += std::to_string(row.round) + "," + row.tenant + "," + policy + "," +
           fmt(row.attained) + "\n";
  }
  return out;
}

std::string jct_csv(const SimulationReport& report) {
  std::string out = "job_id,tenant,submit_round,finish_round,jct_seconds\n";
  for (const auto& j : report.jobs) {
    if (!j.finished) continue;
    out += j.job_id + "," + j.tenant + "," + std::to_string(j.submit_round) + "," +
           std::to_string(j.finish_round) + "," + fmt(j.jct_seconds) + "\n";
  }
  return out;
}

std::string straggler_csv(const SimulationReport& report) {
  std::string out = "round,job_id,worker_count,type_span\n";
  for (const auto& s : report.stragglers) {
    out += std::to_string(s.round) + "," + s.job_id + "," + std::to_string(s.workers) +
           "," + std::to_string(s.type_span) + "\n";
  }
  return out;
}

std::string manifest_json(const ScenarioDocument& doc, const SimulationReport& report,
                          const std::string& scenario_path) {
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(config_hash(doc)));
  json out;
  out["scenario"] = scenario_path;
  out["config_hash"] = std::string(hash);
  out["policy"] = policy_name(doc.config.policy);
  out["seed"] = doc.config.seed;
  out["horizon"] = doc.config.horizon;
  out["rounds_executed"] = report.rounds_executed;
  out["jobs_total"] = report.jobs.size();
  out["jobs_finished"] = report.jobs_finished;
  out["straggler_events"] = report.straggler_events;
  out["straggler_workers"] = report.straggler_workers;
  out["total_estimated_throughput"] = report.total_estimated;
  out["total_actual_throughput"] = report.total_actual;
  return out.dump(2) + "\n";
}

void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigInvalid("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

}  // namespace gpufair

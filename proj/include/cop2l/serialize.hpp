#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cop2l/bounds.hpp"
#include "cop2l/cop2l.hpp"
#include "cop2l/errors.hpp"
#include "cop2l/metrics.hpp"

namespace cop2l {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string real17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ordered_json certificate_to_json(const Certificate& cert) {
  ordered_json j;
  j["task_id"] = cert.task_id;
  j["T"] = cert.T;
  j["n_t"] = cert.n_t;
  j["i_size"] = cert.i_size;
  j["j_size"] = cert.j_size;
  j["mu2"] = cert.mu2;
  j["complement_loss"] = cert.complement_loss;
  j["delta"] = cert.delta;
  j["bound"] = cert.bound;
  return j;
}

inline Certificate certificate_from_json(const ordered_json& j) {
  Certificate cert;
  cert.task_id = j.at("task_id").get<int>();
  cert.T = j.at("T").get<int>();
  cert.n_t = j.at("n_t").get<std::uint64_t>();
  cert.i_size = j.at("i_size").get<std::uint64_t>();
  cert.j_size = j.at("j_size").get<std::uint64_t>();
  cert.mu2 = j.at("mu2").get<std::vector<std::uint64_t>>();
  cert.complement_loss = j.at("complement_loss").get<double>();
  cert.delta = j.at("delta").get<double>();
  cert.bound = j.at("bound").get<double>();
  return cert;
}

// Portable payload of a finished run: everything a verifier needs to rebuild
// the stream, replay the record, and compare certificates and parameters.
struct RunRecord {
  std::string engine_version;
  std::string config_hash;
  std::string method;
  std::uint64_t seed = 0;
  std::string scenario;
  std::map<std::string, std::string> hyperparameters;
  CompressionRecord record;
  std::string params_hash;
  std::vector<Certificate> certificates;
};

inline ordered_json run_record_to_json(const RunRecord& rec) {
  ordered_json j;
  j["engine_version"] = rec.engine_version;
  j["config_hash"] = rec.config_hash;
  j["method"] = rec.method;
  j["seed"] = rec.seed;
  j["scenario"] = rec.scenario;
  ordered_json hp = ordered_json::object();
  for (const auto& [key, value] : rec.hyperparameters) hp[key] = value;
  j["hyperparameters"] = hp;
  j["mu2"] = rec.record.mu2;
  ordered_json tasks = ordered_json::array();
  for (std::size_t t = 0; t < rec.record.tasks.size(); ++t) {
    const auto& entry = rec.record.tasks[t];
    ordered_json jt;
    jt["task_id"] = static_cast<int>(t) + 1;
    jt["si"] = entry.si;
    jt["sj"] = entry.sj;
    ordered_json mu1 = ordered_json::object();
    for (const auto& [idx, removal_task] : entry.mu1)
      mu1[std::to_string(idx)] = removal_task;
    jt["mu1"] = mu1;
    tasks.push_back(jt);
  }
  j["tasks"] = tasks;
  j["params_hash"] = rec.params_hash;
  ordered_json certs = ordered_json::array();
  for (const auto& cert : rec.certificates) certs.push_back(certificate_to_json(cert));
  j["certificates"] = certs;
  return j;
}

inline RunRecord run_record_from_json(const ordered_json& j) {
  RunRecord rec;
  rec.engine_version = j.at("engine_version").get<std::string>();
  rec.config_hash = j.at("config_hash").get<std::string>();
  rec.method = j.at("method").get<std::string>();
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.scenario = j.at("scenario").get<std::string>();
  for (const auto& [key, value] : j.at("hyperparameters").items())
    rec.hyperparameters[key] = value.get<std::string>();
  rec.record.mu2 = j.at("mu2").get<std::vector<std::uint64_t>>();
  for (const auto& jt : j.at("tasks")) {
    TaskRecordEntry entry;
    entry.si = jt.at("si").get<std::vector<std::int64_t>>();
    entry.sj = jt.at("sj").get<std::vector<std::int64_t>>();
    for (const auto& [key, value] : jt.at("mu1").items()) {
      errno = 0;
      char* end = nullptr;
      long long idx = std::strtoll(key.c_str(), &end, 10);
      if (errno != 0 || end == key.c_str() || *end != '\0')
        throw RecordIncompatibleError("record: bad removal map key '" + key + "'");
      entry.mu1[idx] = value.get<int>();
    }
    rec.record.tasks.push_back(std::move(entry));
  }
  rec.params_hash = j.at("params_hash").get<std::string>();
  for (const auto& jc : j.at("certificates"))
    rec.certificates.push_back(certificate_from_json(jc));
  return rec;
}

// Per-run metrics table. One row per (checkpoint task, seen task) pair; the
// four certificate columns stay empty for baseline runs, which have no
// compression record to certify.
inline std::string metrics_csv_text(const std::string& engine_version,
                                    const std::string& config_hash,
                                    const AccuracyMatrix& accuracy,
                                    const std::vector<Certificate>* certificates) {
  std::string text = "# engine_version=" + engine_version +
                     " config_hash=" + config_hash + "\n";
  text += "checkpoint_task,task,accuracy,bound,complement_loss,i_size,j_size\n";
  std::size_t c = 0;
  for (int t = 1; t <= accuracy.row_count(); ++t) {
    for (int tau = 1; tau <= t; ++tau) {
      text += std::to_string(t) + "," + std::to_string(tau) + "," +
              detail::real17(accuracy.at(t, tau));
      if (certificates != nullptr) {
        const Certificate& cert = certificates->at(c);
        if (cert.T != t || cert.task_id != tau)
          throw std::logic_error("metrics_csv_text: certificate order mismatch");
        text += "," + detail::real17(cert.bound) + "," +
                detail::real17(cert.complement_loss) + "," +
                std::to_string(cert.i_size) + "," + std::to_string(cert.j_size);
        ++c;
      } else {
        text += ",,,,";
      }
      text += "\n";
    }
  }
  if (certificates != nullptr && c != certificates->size())
    throw std::logic_error("metrics_csv_text: unused certificates");
  return text;
}

struct MetricsRow {
  int checkpoint_task = 0;
  int task = 0;
  double accuracy = 0.0;
  bool has_bound = false;
  double bound = 0.0;
  double complement_loss = 0.0;
  std::uint64_t i_size = 0;
  std::uint64_t j_size = 0;
};

inline std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
  std::vector<MetricsRow> rows;
  std::stringstream ss(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "checkpoint_task,task,accuracy,bound,complement_loss,i_size,j_size")
        throw CsvFormatError("metrics csv: unexpected header: " + line);
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    while (fields.size() < 7) fields.push_back("");
    if (fields.size() != 7)
      throw CsvFormatError("metrics csv: expected 7 fields: " + line);
    MetricsRow row;
    row.checkpoint_task = std::atoi(fields[0].c_str());
    row.task = std::atoi(fields[1].c_str());
    row.accuracy = std::atof(fields[2].c_str());
    if (!fields[3].empty()) {
      row.has_bound = true;
      row.bound = std::atof(fields[3].c_str());
      row.complement_loss = std::atof(fields[4].c_str());
      row.i_size = std::strtoull(fields[5].c_str(), nullptr, 10);
      row.j_size = std::strtoull(fields[6].c_str(), nullptr, 10);
    }
    if (row.checkpoint_task < 1 || row.task < 1 || row.task > row.checkpoint_task)
      throw CsvFormatError("metrics csv: bad task pair: " + line);
    rows.push_back(row);
  }
  if (!header_seen) throw CsvFormatError("metrics csv: missing header");
  return rows;
}

struct SummaryRow {
  std::string method;
  std::string metric;
  double mean = 0.0;
  double std_dev = 0.0;
  int runs = 0;
};

inline std::string summary_csv_text(const std::string& engine_version,
                                    const std::string& config_hash,
                                    const std::vector<SummaryRow>& rows) {
  std::string text = "# engine_version=" + engine_version +
                     " config_hash=" + config_hash + "\n";
  text += "method,metric,mean,std,runs\n";
  for (const auto& row : rows)
    text += row.method + "," + row.metric + "," + detail::real17(row.mean) + "," +
            detail::real17(row.std_dev) + "," + std::to_string(row.runs) + "\n";
  return text;
}

}  // namespace cop2l

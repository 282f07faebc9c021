#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fraclab/errors.hpp"
#include "fraclab/lab.hpp"

namespace fraclab::lab {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

nlohmann::json Metric::to_json() const {
  return {{"name", name},       {"value", value}, {"tolerance", tolerance},
          {"comparison", comparison}, {"pass", pass},   {"detail", detail}};
}

void Table::write_csv(const std::string& filename) const {
  std::ofstream out(filename, std::ios::binary);
  if (!out) throw std::runtime_error("Table::write_csv: cannot open " + filename);
  for (std::size_t j = 0; j < columns.size(); ++j)
    out << (j ? "," : "") << columns[j];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j)
      out << (j ? "," : "") << fmt(row[j]);
    out << '\n';
  }
}

bool ConvergenceReport::pass() const {
  for (const auto& m : metrics)
    if (m.comparison != "info" && !m.pass) return false;
  return true;
}

nlohmann::json ConvergenceReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["experiment"] = experiment;
  j["provenance"] = {{"config_hash", hex64(config_hash)},
                     {"seed", seed},
                     {"version", version}};
  j["pass"] = pass();
  j["metrics"] = nlohmann::json::array();
  for (const auto& m : metrics) j["metrics"].push_back(m.to_json());
  j["tables"] = nlohmann::json::array();
  for (const auto& t : tables) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : t.rows) rows.push_back(row);
    j["tables"].push_back({{"name", t.name}, {"columns", t.columns}, {"rows", rows}});
  }
  j["notices"] = notices;
  if (!extra.empty()) j["diagnostics"] = extra;
  return j;
}

std::vector<std::string> ConvergenceReport::write_artifacts(
    const std::string& dir) const {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;

  const std::string report_path = dir + "/report.json";
  {
    std::ofstream out(report_path, std::ios::binary);
    if (!out)
      throw std::runtime_error("ConvergenceReport: cannot open " + report_path);
    out << to_json().dump(2) << '\n';
  }
  written.push_back(report_path);

  for (const auto& t : tables) {
    const std::string path = dir + "/" + experiment + "_" + t.name + ".csv";
    t.write_csv(path);
    written.push_back(path);
  }
  return written;
}

}  // namespace fraclab::lab

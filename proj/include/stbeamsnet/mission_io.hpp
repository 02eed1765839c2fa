#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stbeamsnet/errors.hpp"
#include "stbeamsnet/sensor_sim.hpp"

// On-disk mission format: one directory per mission with imu.csv, dvl.csv,
// truth.csv and config.json, plus the dataset.json manifest tying missions to
// their split assignment. All values are SI units printed with 9 significant
// digits.

namespace stbn::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// FNV-1a 64-bit over a file's bytes, hex-encoded.
inline std::uint64_t fnv1a64(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---- config JSON -----------------------------------------------------------

inline json to_json(const sim::ErrorModel& e) {
  return json{{"scale_factor", e.scale_factor},
              {"bias_mps", e.bias},
              {"noise_std_mps", e.noise_std},
              {"imu_accel_noise_std", e.imu_accel_noise_std},
              {"imu_gyro_noise_std", e.imu_gyro_noise_std},
              {"corrupt_resolved_velocity", e.corrupt_resolved_velocity}};
}

inline sim::ErrorModel error_model_from_json(const json& j) {
  sim::ErrorModel e;
  e.scale_factor = j.at("scale_factor").get<double>();
  e.bias = j.at("bias_mps").get<double>();
  e.noise_std = j.at("noise_std_mps").get<double>();
  e.imu_accel_noise_std = j.value("imu_accel_noise_std", e.imu_accel_noise_std);
  e.imu_gyro_noise_std = j.value("imu_gyro_noise_std", e.imu_gyro_noise_std);
  e.corrupt_resolved_velocity = j.value("corrupt_resolved_velocity", false);
  return e;
}

inline json to_json(const sim::MissionConfig& c) {
  return json{{"duration_s", c.duration_s},
              {"seed", c.seed},
              {"mean_speed_mps", c.mean_speed},
              {"maneuver_richness", c.maneuver_richness},
              {"beam_pitch_rad", c.theta},
              {"outage_period_s", c.outage_period_s},
              {"error_model", to_json(c.error_model)}};
}

inline sim::MissionConfig mission_config_from_json(const json& j) {
  sim::MissionConfig c;
  c.duration_s = j.value("duration_s", c.duration_s);
  c.seed = j.value("seed", c.seed);
  c.mean_speed = j.value("mean_speed_mps", c.mean_speed);
  c.maneuver_richness = j.value("maneuver_richness", c.maneuver_richness);
  c.theta = j.value("beam_pitch_rad", c.theta);
  c.outage_period_s = j.value("outage_period_s", c.outage_period_s);
  if (j.contains("error_model")) c.error_model = error_model_from_json(j.at("error_model"));
  return c;
}

// ---- mission directories ----------------------------------------------------

inline void write_mission(const fs::path& dir, const sim::MissionRecord& rec) {
  rec.check_alignment();
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "imu.csv", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "imu.csv").string());
    out << "t,fx,fy,fz,wx,wy,wz\n";
    for (const auto& s : rec.imu) {
      out << fmt9(s.t);
      for (int c = 0; c < 3; ++c) out << "," << fmt9(s.specific_force[c]);
      for (int c = 0; c < 3; ++c) out << "," << fmt9(s.angular_rate[c]);
      out << "\n";
    }
  }
  {
    std::ofstream out(dir / "dvl.csv", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "dvl.csv").string());
    out << "t,vx,vy,vz,valid\n";
    for (const auto& m : rec.dvl) {
      out << fmt9(m.t) << "," << fmt9(m.velocity.vx) << "," << fmt9(m.velocity.vy) << ","
          << fmt9(m.velocity.vz) << "," << (m.valid ? 1 : 0) << "\n";
    }
  }
  {
    std::ofstream out(dir / "truth.csv", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "truth.csv").string());
    out << "t,vx,vy,vz\n";
    for (std::size_t i = 0; i < rec.truth.size(); ++i) {
      out << fmt9(rec.dvl[i].t) << "," << fmt9(rec.truth[i].vx) << "," << fmt9(rec.truth[i].vy)
          << "," << fmt9(rec.truth[i].vz) << "\n";
    }
  }
  {
    std::ofstream out(dir / "config.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "config.json").string());
    out << to_json(rec.config).dump(2) << "\n";
  }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::vector<std::vector<double>> read_csv(const fs::path& path,
                                                 std::size_t expected_columns) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header");
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != expected_columns) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(expected_columns) + " columns, got " +
                    std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      try {
        row.push_back(std::stod(f));
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + f + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline sim::MissionRecord read_mission(const fs::path& dir) {
  sim::MissionRecord rec;
  rec.config = mission_config_from_json(json::parse(read_file(dir / "config.json")));

  for (const auto& row : detail::read_csv(dir / "imu.csv", 7)) {
    sim::ImuSample s;
    s.t = row[0];
    for (int c = 0; c < 3; ++c) s.specific_force[c] = row[1 + c];
    for (int c = 0; c < 3; ++c) s.angular_rate[c] = row[4 + c];
    rec.imu.push_back(s);
  }
  for (const auto& row : detail::read_csv(dir / "dvl.csv", 5)) {
    sim::DvlMeasurement m;
    m.t = row[0];
    m.velocity = {row[1], row[2], row[3]};
    m.valid = row[4] != 0.0;
    rec.dvl.push_back(m);
  }
  for (const auto& row : detail::read_csv(dir / "truth.csv", 4)) {
    rec.truth.push_back({row[1], row[2], row[3]});
  }
  rec.check_alignment();
  return rec;
}

/// Hash of the three stream files, used by the manifest to pin mission
/// contents to their split assignment.
inline std::string mission_content_hash(const fs::path& dir) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char* name : {"imu.csv", "dvl.csv", "truth.csv"}) {
    h = fnv1a64(read_file(dir / name), h);
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- dataset manifest -------------------------------------------------------

struct ManifestEntry {
  std::string dir;  // relative to the manifest's directory
  std::uint64_t seed = 0;
  std::string split;  // "train" or "test"
  std::string content_hash;
};

struct DatasetManifest {
  int format_version = 1;
  std::uint64_t root_seed = 0;
  std::size_t n_history = 3;
  std::vector<ManifestEntry> missions;

  std::size_t test_mission_index() const {
    for (std::size_t i = 0; i < missions.size(); ++i) {
      if (missions[i].split == "test") return i;
    }
    throw ConfigError("manifest assigns no test mission");
  }
};

inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
  json missions = json::array();
  for (const auto& e : m.missions) {
    missions.push_back(json{{"dir", e.dir},
                            {"seed", e.seed},
                            {"split", e.split},
                            {"content_hash", e.content_hash}});
  }
  json doc{{"format_version", m.format_version},
           {"root_seed", m.root_seed},
           {"n_history", m.n_history},
           {"missions", missions}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

inline DatasetManifest read_manifest(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.format_version = doc.at("format_version").get<int>();
  if (m.format_version != 1) {
    throw CompatibilityError("unsupported manifest format version " +
                             std::to_string(m.format_version));
  }
  m.root_seed = doc.at("root_seed").get<std::uint64_t>();
  m.n_history = doc.at("n_history").get<std::size_t>();
  for (const auto& e : doc.at("missions")) {
    ManifestEntry entry;
    entry.dir = e.at("dir").get<std::string>();
    entry.seed = e.at("seed").get<std::uint64_t>();
    entry.split = e.at("split").get<std::string>();
    entry.content_hash = e.value("content_hash", "");
    if (entry.split != "train" && entry.split != "test") {
      throw ConfigError("manifest split must be train or test, got " + entry.split);
    }
    m.missions.push_back(std::move(entry));
  }
  return m;
}

/// Loads every mission named by a manifest (paths relative to the manifest).
inline std::vector<sim::MissionRecord> load_missions(const fs::path& manifest_path,
                                                     const DatasetManifest& m) {
  const fs::path base = manifest_path.parent_path();
  std::vector<sim::MissionRecord> records;
  records.reserve(m.missions.size());
  for (const auto& e : m.missions) {
    records.push_back(read_mission(base / e.dir));
  }
  return records;
}

}  // namespace stbn::io

#include "pullgrid/install_area.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pullgrid/util.hpp"

namespace fs = std::filesystem;

namespace pullgrid {

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "write " + p.string());
  out << data;
  if (!out.good()) throw Error(ErrorCode::IoFailure, "write " + p.string());
}

std::string deps_line(
    const std::vector<std::pair<std::string, std::string>>& deps) {
  std::string s;
  for (const auto& [a, v] : deps) s += a + "|" + v + "\n";
  return s;
}

}  // namespace

InstallArea::InstallArea(const fs::path& root, std::optional<int64_t> quota_mb,
                         TimeSource now)
    : root_(root), quota_mb_(quota_mb), now_(std::move(now)) {
  fs::create_directories(root_);
  fs::path lock = root_ / ".lock";
  lock_fd_ = ::open(lock.c_str(), O_CREAT | O_RDWR, 0644);
  if (lock_fd_ < 0) throw Error(ErrorCode::IoFailure, "open " + lock.string());
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    lock_fd_ = -1;
    throw Error(ErrorCode::AreaLocked, root_.string());
  }
  load_registry();
}

InstallArea::~InstallArea() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

fs::path InstallArea::package_dir(const std::string& app,
                                  const std::string& version) const {
  return root_ / (app + "-" + version);
}

void InstallArea::load_registry() {
  registry_.clear();
  fs::path manifest = root_ / "registry.txt";
  if (!fs::exists(manifest)) return;
  std::ifstream in(manifest);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto parts = split(line, '|');
    if (parts.size() != 5)
      throw Error(ErrorCode::IoFailure, "bad registry line: " + line);
    InstallRecord r;
    r.application = parts[0];
    r.app_version = parts[1];
    r.path = parts[2];
    r.checksum = parse_hex32(parts[3]);
    r.installed_at = std::stod(parts[4]);
    registry_.push_back(std::move(r));
  }
}

void InstallArea::save_registry() {
  std::string out;
  for (const auto& r : registry_) {
    char ts[32];
    std::snprintf(ts, sizeof ts, "%.3f", r.installed_at);
    out += r.application + "|" + r.app_version + "|" + r.path + "|" +
           to_hex32(r.checksum) + "|" + ts + "\n";
  }
  fs::path tmp = root_ / "registry.txt.tmp";
  write_file(tmp, out);
  fs::rename(tmp, root_ / "registry.txt");
}

int64_t InstallArea::used_bytes() const {
  int64_t used = 0;
  for (const auto& r : registry_) {
    std::error_code ec;
    for (auto it = fs::recursive_directory_iterator(r.path, ec);
         !ec && it != fs::recursive_directory_iterator(); ++it) {
      if (it->is_regular_file(ec)) used += int64_t(it->file_size(ec));
    }
  }
  return used;
}

bool InstallArea::installed(const std::string& app,
                            const std::string& version) const {
  for (const auto& r : registry_)
    if (r.application == app && r.app_version == version) return true;
  return false;
}

std::vector<InstallRecord> InstallArea::list_installed() const {
  return registry_;
}

InstallReport InstallArea::install(const std::string& app,
                                   const std::string& version,
                                   PackageProvider& provider) {
  InstallReport report;
  auto order = provider.resolve_deps(app, version);
  for (const auto& [a, v] : order) {
    if (installed(a, v)) {
      report.items.push_back({a, v, "cached"});
      continue;
    }
    Package pkg = provider.fetch_package(a, v);
    if (crc32_bytes(pkg.payload) != pkg.checksum)
      throw Error(ErrorCode::ChecksumMismatch, a + "|" + v);
    auto files = unpack_archive(pkg.payload);

    int64_t incoming = int64_t(pkg.bootstrap.size());
    for (const auto& [path, data] : files) incoming += int64_t(data.size());
    if (quota_mb_ && used_bytes() + incoming > *quota_mb_ * 1024 * 1024)
      throw Error(ErrorCode::InsufficientDisk,
                  a + "|" + v + " needs " + std::to_string(incoming) +
                      " bytes");

    // Unpack into a staging directory and rename into place so a failure
    // mid-unpack never leaves a registered half-package.
    fs::path staging = root_ / (".staging-" + a + "-" + v);
    fs::remove_all(staging);
    fs::create_directories(staging);
    for (const auto& [path, data] : files) {
      fs::path dst = staging / path;
      fs::create_directories(dst.parent_path());
      write_file(dst, data);
    }
    write_file(staging / "bootstrap.sh", pkg.bootstrap);
    write_file(staging / ".deps", deps_line(pkg.dependencies));

    fs::path final_dir = package_dir(a, v);
    fs::remove_all(final_dir);
    fs::rename(staging, final_dir);

    InstallRecord rec;
    rec.application = a;
    rec.app_version = v;
    rec.path = final_dir.string();
    rec.checksum = pkg.checksum;
    rec.installed_at = now_();
    registry_.push_back(rec);
    save_registry();
    report.items.push_back({a, v, "installed"});
  }
  return report;
}

void InstallArea::uninstall(const std::string& app,
                            const std::string& version) {
  auto it = registry_.end();
  for (auto i = registry_.begin(); i != registry_.end(); ++i)
    if (i->application == app && i->app_version == version) it = i;
  if (it == registry_.end())
    throw Error(ErrorCode::NotInstalled, app + "|" + version);

  std::vector<std::string> dependents;
  for (const auto& r : registry_) {
    if (r.application == app && r.app_version == version) continue;
    fs::path deps = fs::path(r.path) / ".deps";
    if (!fs::exists(deps)) continue;
    std::ifstream in(deps);
    std::string line;
    while (std::getline(in, line)) {
      if (line == app + "|" + version)
        dependents.push_back(r.application + "/" + r.app_version);
    }
  }
  if (!dependents.empty()) {
    std::string who;
    for (const auto& d : dependents) who += (who.empty() ? "" : ", ") + d;
    throw Error(ErrorCode::DependedUpon, who);
  }

  fs::remove_all(it->path);
  registry_.erase(it);
  save_registry();
}

bool InstallArea::verify(const std::string& app, const std::string& version) {
  for (const auto& r : registry_) {
    if (r.application != app || r.app_version != version) continue;
    std::map<std::string, std::string> files;
    fs::path dir(r.path);
    for (auto& e : fs::recursive_directory_iterator(dir)) {
      if (!e.is_regular_file()) continue;
      auto rel = fs::relative(e.path(), dir).string();
      if (rel == "bootstrap.sh" || rel == ".deps") continue;
      files[rel] = read_file(e.path());
    }
    return crc32_bytes(pack_archive(files)) == r.checksum;
  }
  throw Error(ErrorCode::NotInstalled, app + "|" + version);
}

}  // namespace pullgrid

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pullgrid/repo_service.hpp"

namespace pullgrid {

struct InstallRecord {
  std::string application;
  std::string app_version;
  std::string path;
  uint32_t checksum = 0;  // payload checksum at install time
  double installed_at = 0;
};

struct InstallItem {
  std::string application;
  std::string app_version;
  std::string action;  // "installed" | "cached"
};

struct InstallReport {
  std::vector<InstallItem> items;
};

/// Site-local software area. Single-writer: construction takes a lock file
/// under the root and fails with AreaLocked while another holder exists.
/// The registry is a text manifest, one record per line:
/// app|version|path|checksum|timestamp.
class InstallArea {
 public:
  explicit InstallArea(const std::filesystem::path& root,
                       std::optional<int64_t> quota_mb = std::nullopt,
                       TimeSource now = wall_clock());
  ~InstallArea();

  InstallArea(const InstallArea&) = delete;
  InstallArea& operator=(const InstallArea&) = delete;

  /// Installs the package and its dependency closure, dependencies first.
  /// Already-installed packages are skipped and reported as cached. A
  /// checksum or disk failure aborts before the failing package is
  /// registered; packages completed earlier in the call stay installed.
  InstallReport install(const std::string& app, const std::string& version,
                        PackageProvider& provider);

  /// Removes one installed package. Refuses while another installed
  /// package lists it as a dependency.
  void uninstall(const std::string& app, const std::string& version);

  bool installed(const std::string& app, const std::string& version) const;
  std::vector<InstallRecord> list_installed() const;

  /// Re-derives the payload checksum from on-disk content and compares it
  /// with the registry record.
  bool verify(const std::string& app, const std::string& version);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path package_dir(const std::string& app,
                                    const std::string& version) const;

 private:
  void load_registry();
  void save_registry();
  int64_t used_bytes() const;

  std::filesystem::path root_;
  std::optional<int64_t> quota_mb_;
  TimeSource now_;
  int lock_fd_ = -1;
  std::vector<InstallRecord> registry_;
};

}  // namespace pullgrid

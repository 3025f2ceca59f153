#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pullgrid/production_service.hpp"
#include "pullgrid/store.hpp"

namespace pullgrid {

/// Self-contained software package: an opaque archive plus a generated
/// bootstrap script and explicit dependencies.
struct Package {
  std::string application;
  std::string app_version;
  std::string payload;  // archive bytes
  std::string bootstrap;
  std::vector<std::pair<std::string, std::string>> dependencies;
  uint32_t checksum = 0;  // crc32 of payload
};

// Deterministic uncompressed archive: "PKAR1\n", entry count, then entries
// sorted by path. Identical file maps always produce identical bytes, so
// package checksums are reproducible.
std::string pack_archive(const std::map<std::string, std::string>& files);
std::map<std::string, std::string> unpack_archive(const std::string& bytes);

/// Setup script unpacked alongside the payload; sourcing it puts the
/// package's bin/ on PATH.
std::string generate_bootstrap(const std::string& app,
                               const std::string& version);

/// Package whose entry point `run-<app>` writes a deterministic byte
/// stream: `run-<app> <seed> <size> <outfile>`. Used by simulations and
/// the real-mode workload.
Package make_synthetic_package(
    const std::string& app, const std::string& version,
    const std::vector<std::pair<std::string, std::string>>& deps = {});

/// Source of published packages; implemented by the repository service
/// (in-process) and by its RPC client.
class PackageProvider {
 public:
  virtual ~PackageProvider() = default;
  virtual Package fetch_package(const std::string& app,
                                const std::string& version) = 0;
  virtual std::vector<std::pair<std::string, std::string>> resolve_deps(
      const std::string& app, const std::string& version) = 0;
};

/// Central release area: immutable published packages with dependency
/// tracking.
class RepoService : public PackageProvider {
 public:
  RepoService(Store& store, TimeSource now);

  void publish(const Package& p);
  Package fetch_package(const std::string& app,
                        const std::string& version) override;
  std::vector<std::pair<std::string, std::string>> query_available();

  /// Topological order of the transitive closure, dependencies before
  /// dependents, lexicographic tie-break. Includes (app, version) itself
  /// as the last element that depends on nothing later.
  std::vector<std::pair<std::string, std::string>> resolve_deps(
      const std::string& app, const std::string& version) override;

 private:
  Store& store_;
  TimeSource now_;
};

}  // namespace pullgrid

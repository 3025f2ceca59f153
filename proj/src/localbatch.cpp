#include "pullgrid/localbatch.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "pullgrid/errors.hpp"
#include "pullgrid/util.hpp"

namespace pullgrid {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

LocalProcessBatch::LocalProcessBatch(const fs::path& work_dir, int slot_count,
                                     TimeSource now)
    : work_dir_(work_dir), slot_count_(slot_count), now_(std::move(now)) {
  if (slot_count_ < 1)
    throw Error(ErrorCode::InvalidParameters, "slot_count must be >= 1");
  fs::create_directories(work_dir_);
}

LocalProcessBatch::~LocalProcessBatch() {
  // Leave no zombies behind; jobs themselves are allowed to finish.
  for (auto& [id, e] : jobs_)
    if (e.pid > 0) waitpid(static_cast<pid_t>(e.pid), nullptr, 0);
}

std::string LocalProcessBatch::submit(const JobDescriptor& job,
                                      const std::string& wrapper_script) {
  std::string batch_id = "L" + zero_pad(++seq_, 6);
  Entry e;
  e.job = job;
  e.dir = work_dir_ / batch_id;
  fs::create_directories(e.dir);
  {
    std::ofstream out(e.dir / "wrapper.sh", std::ios::binary);
    out << wrapper_script;
    if (!out)
      throw Error(ErrorCode::BatchSubmissionFailed,
                  "cannot write wrapper for " + batch_id);
  }
  e.view.batch_id = batch_id;
  e.view.state = BatchJobView::State::Queued;
  jobs_.emplace(batch_id, std::move(e));
  queue_.push_back(batch_id);
  pump();
  return batch_id;
}

void LocalProcessBatch::spawn(Entry& e) {
  pid_t pid = fork();
  if (pid < 0)
    throw Error(ErrorCode::BatchSubmissionFailed, "fork failed");
  if (pid == 0) {
    if (chdir(e.dir.c_str()) != 0) _exit(127);
    int fd = open("job.log", O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd >= 0) {
      dup2(fd, 1);
      dup2(fd, 2);
      close(fd);
    }
    execl("/bin/sh", "sh", "wrapper.sh", static_cast<char*>(nullptr));
    _exit(127);
  }
  e.pid = pid;
  e.view.state = BatchJobView::State::Running;
  e.view.started_at = now_();
  running_ += 1;
}

void LocalProcessBatch::pump() {
  for (auto& [id, e] : jobs_) {
    if (e.view.state != BatchJobView::State::Running || e.pid <= 0) continue;
    int st = 0;
    pid_t r = waitpid(static_cast<pid_t>(e.pid), &st, WNOHANG);
    if (r != static_cast<pid_t>(e.pid)) continue;
    e.pid = -1;
    e.view.state = BatchJobView::State::Completed;
    e.view.finished_at = now_();
    if (WIFEXITED(st) && WEXITSTATUS(st) == 0)
      e.view.outcome = BatchJobView::Outcome::Success;
    else if (WIFSIGNALED(st))
      e.view.outcome = BatchJobView::Outcome::SiteFailure;
    else
      e.view.outcome = BatchJobView::Outcome::AppFailure;
    running_ -= 1;
  }
  while (running_ < slot_count_ && !queue_.empty()) {
    std::string id = queue_.front();
    queue_.pop_front();
    spawn(jobs_.at(id));
  }
}

BatchSnapshot LocalProcessBatch::status() {
  pump();
  BatchSnapshot snap;
  snap.queued = static_cast<int>(queue_.size());
  snap.running = running_;
  snap.slot_count = slot_count_;
  snap.cpu_power = 1.0;
  std::error_code ec;
  auto space = fs::space(work_dir_, ec);
  snap.free_disk_mb =
      ec ? 0 : static_cast<int64_t>(space.available / (1 << 20));
  for (const auto& [id, e] : jobs_) snap.jobs.push_back(e.view);
  return snap;
}

CollectedJob LocalProcessBatch::collect(const std::string& batch_id) {
  auto it = jobs_.find(batch_id);
  if (it == jobs_.end())
    throw Error(ErrorCode::InvalidParameters, "unknown batch id " + batch_id);
  Entry& e = it->second;
  if (e.view.state != BatchJobView::State::Completed)
    throw Error(ErrorCode::IllegalState,
                "batch " + batch_id + " has not completed");

  CollectedJob out;
  fs::path logp = e.dir / "job.log";
  if (fs::exists(logp)) {
    std::string data = read_file(logp);
    out.log_path = logp.string();
    out.log_size = static_cast<int64_t>(data.size());
    out.log_checksum = crc32_bytes(data);
  }
  if (e.view.outcome != BatchJobView::Outcome::Success) return out;

  fs::path manifest = e.dir / "outputs" / "manifest.txt";
  if (!fs::exists(manifest)) return out;
  std::istringstream lines(read_file(manifest));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    auto fields = split(line, '|');
    if (fields.size() != 4)
      throw Error(ErrorCode::MalformedDocument,
                  "manifest line '" + line + "' in " + batch_id);
    OutputFile f;
    fs::path p = e.dir / fields[0];
    std::string data = read_file(p);
    f.local_path = p.string();
    f.data_type = fields[1];
    f.step_index = static_cast<int>(std::stol(fields[2]));
    f.events = std::stoll(fields[3]);
    f.size_bytes = static_cast<int64_t>(data.size());
    f.checksum = crc32_bytes(data);
    out.outputs.push_back(std::move(f));
  }
  return out;
}

void LocalProcessBatch::reap(const std::string& batch_id) {
  auto it = jobs_.find(batch_id);
  if (it == jobs_.end())
    throw Error(ErrorCode::InvalidParameters, "unknown batch id " + batch_id);
  if (it->second.pid > 0)
    waitpid(static_cast<pid_t>(it->second.pid), nullptr, 0);
  // The work directory stays on disk: pending transfers read from it.
  jobs_.erase(it);
}

bool LocalProcessBatch::drain(double timeout_seconds) {
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration<double>(timeout_seconds);
  while (std::chrono::steady_clock::now() < deadline) {
    pump();
    bool busy = running_ > 0 || !queue_.empty();
    if (!busy) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  pump();
  return running_ == 0 && queue_.empty();
}

// ------------------------------------------------------------ transfers ---

FileTransferBackend::FileTransferBackend(fs::path root)
    : root_(std::move(root)) {
  fs::create_directories(root_);
}

fs::path FileTransferBackend::destination(const std::string& storage_element,
                                          const std::string& remote_path)
    const {
  std::string rel = remote_path;
  while (!rel.empty() && rel.front() == '/') rel.erase(rel.begin());
  return root_ / storage_element / rel;
}

std::optional<uint32_t> FileTransferBackend::transfer(
    const std::string& local_path, const std::string& storage_element,
    const std::string& remote_path) {
  try {
    std::string data = read_file(local_path);
    fs::path dest = destination(storage_element, remote_path);
    fs::create_directories(dest.parent_path());
    fs::path tmp = dest;
    tmp += ".part";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << data;
      if (!out) return std::nullopt;
    }
    fs::rename(tmp, dest);
    return crc32_bytes(read_file(dest));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace pullgrid

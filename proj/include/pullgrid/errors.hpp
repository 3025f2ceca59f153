#pragma once

#include <stdexcept>
#include <string>

namespace pullgrid {

/// Error codes shared by all components. The numeric value doubles as the
/// XML-RPC fault code, so clients can reconstruct the error kind from a fault.
enum class ErrorCode : int {
  // protocol
  MalformedDocument = 101,
  UnsupportedType = 102,
  DepthExceeded = 103,
  MissingField = 104,
  MethodNotFound = 105,

  // store
  Conflict = 201,
  CorruptJournal = 202,
  IoFailure = 203,

  // model / production service
  MismatchedWorkflow = 301,
  InvalidPipeline = 302,
  DuplicateId = 303,
  UnknownWorkflow = 304,
  InvalidParameters = 305,
  UnknownJob = 306,
  IllegalState = 307,
  UnknownRun = 308,

  // bookkeeping
  LfnConflict = 401,
  UnknownLfn = 402,
  NotPending = 403,
  ChecksumMismatch = 404,
  RejectedDataset = 405,

  // software repository
  MissingDependency = 501,
  DuplicateVersion = 502,
  CyclicDependency = 503,
  UnknownPackage = 504,
  InsufficientDisk = 505,
  NotInstalled = 506,
  DependedUpon = 507,
  AreaLocked = 508,

  // agent / site simulation
  ServiceUnreachable = 601,
  BatchSubmissionFailed = 602,
  UnknownSite = 603,
  NoInnerResources = 604,
};

const char* error_name(ErrorCode code);

/// Exception carrying a typed error code. Fault messages on the wire are
/// "<name>: <detail>" so tests and operators can match on the symbol.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pullgrid

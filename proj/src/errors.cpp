#include "pullgrid/errors.hpp"

namespace pullgrid {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::UnsupportedType: return "UnsupportedType";
    case ErrorCode::DepthExceeded: return "DepthExceeded";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::MethodNotFound: return "MethodNotFound";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::CorruptJournal: return "CorruptJournal";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MismatchedWorkflow: return "MismatchedWorkflow";
    case ErrorCode::InvalidPipeline: return "InvalidPipeline";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownWorkflow: return "UnknownWorkflow";
    case ErrorCode::InvalidParameters: return "InvalidParameters";
    case ErrorCode::UnknownJob: return "UnknownJob";
    case ErrorCode::IllegalState: return "IllegalState";
    case ErrorCode::UnknownRun: return "UnknownRun";
    case ErrorCode::LfnConflict: return "LfnConflict";
    case ErrorCode::UnknownLfn: return "UnknownLfn";
    case ErrorCode::NotPending: return "NotPending";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::RejectedDataset: return "RejectedDataset";
    case ErrorCode::MissingDependency: return "MissingDependency";
    case ErrorCode::DuplicateVersion: return "DuplicateVersion";
    case ErrorCode::CyclicDependency: return "CyclicDependency";
    case ErrorCode::UnknownPackage: return "UnknownPackage";
    case ErrorCode::InsufficientDisk: return "InsufficientDisk";
    case ErrorCode::NotInstalled: return "NotInstalled";
    case ErrorCode::DependedUpon: return "DependedUpon";
    case ErrorCode::AreaLocked: return "AreaLocked";
    case ErrorCode::ServiceUnreachable: return "ServiceUnreachable";
    case ErrorCode::BatchSubmissionFailed: return "BatchSubmissionFailed";
    case ErrorCode::UnknownSite: return "UnknownSite";
    case ErrorCode::NoInnerResources: return "NoInnerResources";
  }
  return "UnknownError";
}

}  // namespace pullgrid

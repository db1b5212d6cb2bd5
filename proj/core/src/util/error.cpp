#include "periogan/util/error.hpp"

namespace periogan {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::IOFailure: return "IOFailure";
    case ErrorKind::InvalidTarget: return "InvalidTarget";
    case ErrorKind::InvalidBatchSize: return "InvalidBatchSize";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::ConditioningError: return "ConditioningError";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::InvalidBound: return "InvalidBound";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::DivergedRun: return "DivergedRun";
    case ErrorKind::ChecksumError: return "ChecksumError";
    case ErrorKind::EmbedError: return "EmbedError";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::InvalidPerplexity: return "InvalidPerplexity";
    case ErrorKind::MissingClass: return "MissingClass";
    case ErrorKind::UsageError: return "UsageError";
  }
  return "Error";
}

}  // namespace periogan

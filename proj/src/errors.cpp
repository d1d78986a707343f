#include "pfacts/errors.hpp"

namespace pfacts {

const char* category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfig: return "ConfigError";
    case ErrorCategory::kParse: return "ParseError";
    case ErrorCategory::kData: return "DataError";
    case ErrorCategory::kIo: return "IoError";
    case ErrorCategory::kEmbedding: return "EmbeddingError";
    case ErrorCategory::kTransport: return "TransportError";
    case ErrorCategory::kProtocol: return "ProtocolError";
    case ErrorCategory::kModel: return "ModelError";
    case ErrorCategory::kNumeric: return "NumericError";
    case ErrorCategory::kSchema: return "SchemaError";
  }
  return "Error";
}

int exit_code(ErrorCategory category) {
  // 1 is reserved for unexpected failures, 64 for usage errors.
  switch (category) {
    case ErrorCategory::kConfig: return 2;
    case ErrorCategory::kParse: return 3;
    case ErrorCategory::kData: return 4;
    case ErrorCategory::kIo: return 5;
    case ErrorCategory::kEmbedding: return 6;
    case ErrorCategory::kTransport: return 7;
    case ErrorCategory::kProtocol: return 8;
    case ErrorCategory::kModel: return 9;
    case ErrorCategory::kNumeric: return 10;
    case ErrorCategory::kSchema: return 11;
  }
  return 1;
}

}  // namespace pfacts

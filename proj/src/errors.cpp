#include "zerolocus/errors.hpp"

namespace zerolocus {

const char* error_kind_name(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::contract: return "contract";
        case ErrorKind::usage: return "usage";
        case ErrorKind::numerical: return "numerical";
        case ErrorKind::io: return "io";
        case ErrorKind::schema: return "schema";
    }
    return "unknown";
}

}  // namespace zerolocus

#include "fxfit/error.hpp"

namespace fxfit {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::io: return "io";
        case ErrorKind::format: return "format";
        case ErrorKind::empty_input: return "empty_input";
        case ErrorKind::range: return "range";
        case ErrorKind::shape: return "shape";
        case ErrorKind::non_finite: return "non_finite";
        case ErrorKind::precondition: return "precondition";
    }
    return "unknown";
}

}  // namespace fxfit

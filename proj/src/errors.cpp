#include "doppler/errors.hpp"

namespace doppler {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Frame: return "frame";
        case ErrorKind::Dimension: return "dimension";
        case ErrorKind::Degeneracy: return "degeneracy";
        case ErrorKind::NonNormalizable: return "non-normalizable";
        case ErrorKind::DefectiveMatrix: return "defective-matrix";
        case ErrorKind::SingularPropagator: return "singular-propagator";
        case ErrorKind::PoleOnAxis: return "pole-on-axis";
        case ErrorKind::NumericFailure: return "numeric-failure";
    }
    return "unknown";
}

}  // namespace doppler

#pragma once

#include <stdexcept>
#include <string>

namespace hybridloc {

// Input admits no unique geometric solution (collinear points, zero
// baseline, rank-deficient design matrix, ...).
class DegenerateGeometryError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incremental reconstruction could not even bootstrap a two-view map.
class EmptyReconstructionError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fewer than three shared frames (or collinear centers): the similarity
// between the reconstruction frame and the scan frame is unobservable.
class AlignmentInfeasibleError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A pipeline stage is missing an upstream artifact.
class StageDependencyError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Angle between displacement vectors is undefined (zero-length input).
class UndefinedAngleError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hybridloc

#pragma once

#include <stdexcept>
#include <string>

namespace coropve {

/// Base class for all domain errors thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Problems with the shape or content of input data (CLI exit code 2).
class DataError : public Error {
public:
    using Error::Error;
};

/// Algorithmic / numerical failures (CLI exit code 3).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed on-disk data. The message names the file and the offending
/// field or byte offset.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

/// Invalid phantom specification (e.g. plaque shell thinner than the lumen).
class SpecError : public DataError {
public:
    using DataError::DataError;
};

/// Consecutive centerline points coincide; no tangent can be formed.
class DegenerateTangentError : public DataError {
public:
    using DataError::DataError;
};

/// Intensity profile has no peak above the background level.
class NoPeakError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Arc-length samples do not support a quadratic fit.
class RankDeficientError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Robust fit rejected so many samples that no model can be refit.
class AllOutliersError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Calibration curve has fewer than two usable points.
class InsufficientRangeError : public NumericError {
public:
    using NumericError::NumericError;
};

class EmptyDatabaseError : public DataError {
public:
    using DataError::DataError;
};

class LengthMismatchError : public DataError {
public:
    using DataError::DataError;
};

class DimMismatchError : public DataError {
public:
    using DataError::DataError;
};

class EmptySurfaceError : public DataError {
public:
    using DataError::DataError;
};

/// Only one class present where both positives and negatives are required.
class DegenerateLabelsError : public DataError {
public:
    using DataError::DataError;
};

/// Estimated variance of an AUC difference is not positive.
class DegenerateVarianceError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Dangling parent links or attachment points outside the parent branch.
class TopologyError : public DataError {
public:
    using DataError::DataError;
};

/// Queried location is outside the vessel tree.
class LocationError : public DataError {
public:
    using DataError::DataError;
};

/// Iterative solver failed to reach its tolerance.
class NoConvergenceError : public NumericError {
public:
    NoConvergenceError(const std::string& what, double residual)
        : NumericError(what), final_residual(residual) {}
    double final_residual = 0.0;
};

}  // namespace coropve

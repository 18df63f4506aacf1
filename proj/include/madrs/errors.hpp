#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace madrs {

/// Base for every fatal error raised by the pipeline.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedRecord : public Error {
public:
    MalformedRecord(std::string source, std::size_t line, std::string reason)
        : Error(source + ":" + std::to_string(line) + ": " + reason),
          source_(std::move(source)), line_(line), reason_(std::move(reason)) {}

    const std::string& source() const { return source_; }
    std::size_t line() const { return line_; }
    const std::string& reason() const { return reason_; }

private:
    std::string source_;
    std::size_t line_;
    std::string reason_;
};

class DuplicateInterviewId : public Error {
public:
    explicit DuplicateInterviewId(const std::string& id)
        : Error("duplicate interview_id '" + id + "'"), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

class DuplicateVisit : public Error {
public:
    DuplicateVisit(const std::string& patient, int visit)
        : Error("duplicate visit " + std::to_string(visit) + " for patient '" + patient + "'") {}
};

class MissingGroundTruthItem : public Error {
public:
    MissingGroundTruthItem(const std::string& interview_id, const std::string& item)
        : Error("interview '" + interview_id + "' scores block lacks item '" + item + "'"),
          item_(item) {}
    const std::string& item() const { return item_; }

private:
    std::string item_;
};

class CatalogError : public Error {
public:
    using Error::Error;
};

class EmptyContext : public Error {
public:
    EmptyContext() : Error("assessment context is empty") {}
};

class EmptyQuestion : public Error {
public:
    EmptyQuestion() : Error("segmentation question is empty") {}
};

class NoClinicianSpeech : public Error {
public:
    explicit NoClinicianSpeech(const std::string& interview_id)
        : Error("interview '" + interview_id + "' has no clinician utterances") {}
};

/// Raised by metric routines on unusable input.
class MetricError : public Error {
public:
    using Error::Error;
};

class LengthMismatch : public MetricError {
public:
    LengthMismatch(std::size_t a, std::size_t b)
        : MetricError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class ConstantTruth : public MetricError {
public:
    ConstantTruth() : MetricError("truth is constant; R^2 undefined") {}
};

class ZeroBetweenTargetVariance : public MetricError {
public:
    ZeroBetweenTargetVariance() : MetricError("between-target mean square is zero; ICC undefined") {}
};

class MissingCell : public MetricError {
public:
    MissingCell(std::size_t row, std::size_t col)
        : MetricError("missing rating at (" + std::to_string(row) + "," + std::to_string(col) + ")") {}
};

class MissingGroundTruth : public Error {
public:
    explicit MissingGroundTruth(const std::string& interview_id)
        : Error("interview '" + interview_id + "' has no clinician scores") {}
};

class EmptyPatientGroup : public Error {
public:
    EmptyPatientGroup() : Error("no observations to decompose") {}
};

class NonConvergence : public Error {
public:
    using Error::Error;
};

class SingularDesign : public Error {
public:
    SingularDesign(std::string message, std::vector<std::string> columns)
        : Error(std::move(message)), columns_(std::move(columns)) {}
    const std::vector<std::string>& columns() const { return columns_; }

private:
    std::vector<std::string> columns_;
};

/// Invalid command-line or config input (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace madrs

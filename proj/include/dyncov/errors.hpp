/*
   Copyright 2026 The dyncov Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dyncov {

enum class ErrorKind {
    ShapeError,
    SingularDesign,
    DegenerateCorrelation,
    ZeroVariance,
    NonMonotoneCorrection,
    EmptyTargets,
    NotPositiveDefinite,
    PermutationDegeneracy,
    InvalidCorrelation,
    Malformed,
    DuplicateGene,
    EmptyFile,
    AlignmentError,
    ValidationError,
    IoError,
    UsageError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ShapeError: return "ShapeError";
        case ErrorKind::SingularDesign: return "SingularDesign";
        case ErrorKind::DegenerateCorrelation: return "DegenerateCorrelation";
        case ErrorKind::ZeroVariance: return "ZeroVariance";
        case ErrorKind::NonMonotoneCorrection: return "NonMonotoneCorrection";
        case ErrorKind::EmptyTargets: return "EmptyTargets";
        case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorKind::PermutationDegeneracy: return "PermutationDegeneracy";
        case ErrorKind::InvalidCorrelation: return "InvalidCorrelation";
        case ErrorKind::Malformed: return "Malformed";
        case ErrorKind::DuplicateGene: return "DuplicateGene";
        case ErrorKind::EmptyFile: return "EmptyFile";
        case ErrorKind::AlignmentError: return "AlignmentError";
        case ErrorKind::ValidationError: return "ValidationError";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::UsageError: return "UsageError";
    }
    return "Unknown";
}

/// Numerical failures abort with exit code 4 in the CLI; input problems with 3.
constexpr bool is_numerical(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::SingularDesign:
        case ErrorKind::DegenerateCorrelation:
        case ErrorKind::ZeroVariance:
        case ErrorKind::NonMonotoneCorrection:
        case ErrorKind::NotPositiveDefinite:
        case ErrorKind::PermutationDegeneracy:
        case ErrorKind::InvalidCorrelation:
            return true;
        default:
            return false;
    }
}

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

/// Parse failure carrying a 1-based line and column.
class MalformedInput : public Error {
  public:
    MalformedInput(std::size_t line, std::size_t column, const std::string& what)
        : Error(ErrorKind::Malformed,
                "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

  private:
    std::size_t line_;
    std::size_t column_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace dyncov

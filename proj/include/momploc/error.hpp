// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The momploc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef MOMPLOC_ERROR_HPP
#define MOMPLOC_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace momploc {

enum class ErrorKind {
    InconsistentDirection,
    DegenerateGeometry,
    NonUnitModulus,
    ShapeMismatch,
    ConfigError,
    SingularCombiner,
    MissingBlock,
    NoProgress,
    NoLoSPath,
    UnderDetermined,
    NegativeDelay,
    ParallelGeometry,
    EmptyInput,
    InvalidInput,
};

inline std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::InconsistentDirection: return "InconsistentDirection";
    case ErrorKind::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorKind::NonUnitModulus: return "NonUnitModulus";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::SingularCombiner: return "SingularCombiner";
    case ErrorKind::MissingBlock: return "MissingBlock";
    case ErrorKind::NoProgress: return "NoProgress";
    case ErrorKind::NoLoSPath: return "NoLoSPath";
    case ErrorKind::UnderDetermined: return "UnderDetermined";
    case ErrorKind::NegativeDelay: return "NegativeDelay";
    case ErrorKind::ParallelGeometry: return "ParallelGeometry";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::InvalidInput: return "InvalidInput";
    }
    return "Unknown";
}

// Every failure raised by the library carries a kind so callers (the
// experiment driver in particular) can turn it into a per-trial record.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what)
{
    throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what)
{
    if (!condition)
        fail(kind, what);
}

} // namespace momploc

#endif

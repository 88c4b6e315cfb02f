// SPDX-License-Identifier: Apache-2.0
/**
 * @file   errors.hpp
 * @brief  Exception hierarchy shared by every seqclass module.
 *
 * Each error carries an ErrorKind so the command-line front end can map it
 * onto a stable process exit code without string matching.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace seqclass {

enum class ErrorKind {
  shape,
  index,
  parameter,
  empty_input,
  label,
  consistency,
  parse,
  format,
  io,
  schema_mismatch,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

#define SEQCLASS_DEFINE_ERROR(Name, Kind)                                      \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string &what) : Error(ErrorKind::Kind, what) {}   \
  };

SEQCLASS_DEFINE_ERROR(ShapeError, shape)
SEQCLASS_DEFINE_ERROR(IndexError, index)
SEQCLASS_DEFINE_ERROR(ParameterError, parameter)
SEQCLASS_DEFINE_ERROR(EmptyInputError, empty_input)
SEQCLASS_DEFINE_ERROR(LabelError, label)
SEQCLASS_DEFINE_ERROR(ConsistencyError, consistency)
SEQCLASS_DEFINE_ERROR(ParseError, parse)
SEQCLASS_DEFINE_ERROR(FormatError, format)
SEQCLASS_DEFINE_ERROR(IoError, io)
SEQCLASS_DEFINE_ERROR(SchemaMismatchError, schema_mismatch)

#undef SEQCLASS_DEFINE_ERROR

} // namespace seqclass

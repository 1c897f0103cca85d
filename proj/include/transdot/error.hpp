// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace transdot {

/// Base class for every error raised by the model.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested operation needs a special value the format profile lacks.
class UnsupportedProfile : public Error {
 public:
  using Error::Error;
};

/// Operation/format combination outside the supported mode matrix.
class UnsupportedMode : public Error {
 public:
  using Error::Error;
};

class InvalidShiftAmount : public Error {
 public:
  using Error::Error;
};

class InvalidWidth : public Error {
 public:
  using Error::Error;
};

class InvalidSegmentation : public Error {
 public:
  using Error::Error;
};

/// A fixed-point window was too narrow for the value it had to hold.
class WindowOverflow : public Error {
 public:
  using Error::Error;
};

class NotFinite : public Error {
 public:
  using Error::Error;
};

}  // namespace transdot

/******************************************************************************
 * Copyright 2026 The viinit Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#ifndef VIINIT_ERROR_HPP_
#define VIINIT_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace viinit {

/// Error categories. The numeric values double as CLI exit codes
/// (0 = success, 5 = partial result, see tools/).
enum class ErrorCode {
  kConfig = 2,     ///< bad configuration, invalid argument, unknown option
  kData = 3,       ///< parse failure, validation failure, insufficient data
  kNumerical = 4,  ///< factorization failure, non-finite values
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline Error config_error(const std::string& what) {
  return Error(ErrorCode::kConfig, what);
}
inline Error data_error(const std::string& what) {
  return Error(ErrorCode::kData, what);
}
inline Error numerical_error(const std::string& what) {
  return Error(ErrorCode::kNumerical, what);
}

}  // namespace viinit

#endif  // VIINIT_ERROR_HPP_

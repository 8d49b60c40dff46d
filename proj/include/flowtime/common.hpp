// Copyright 2020 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FLOWTIME_COMMON_HPP_
#define FLOWTIME_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

namespace flowtime {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a size guard (oracle, brute force) refuses an input.
class GuardError : public Error {
 public:
  using Error::Error;
};

inline int64_t checked_mul(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw Error("integer overflow");
  return r;
}

inline int64_t checked_add(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw Error("integer overflow");
  return r;
}

inline int64_t ipow(int64_t base, int64_t exp) {
  int64_t r = 1;
  for (int64_t i = 0; i < exp; ++i) r = checked_mul(r, base);
  return r;
}

inline Rational rpow(const Rational& base, int64_t exp) {
  if (exp < 0) return Rational(1) / rpow(base, -exp);
  Rational result(1);
  Rational b = base;
  while (exp > 0) {
    if (exp & 1) result *= b;
    exp >>= 1;
    if (exp > 0) b *= b;
  }
  return result;
}

namespace internal {

inline double log2_big(const BigInt& n) {
  const unsigned bits = boost::multiprecision::msb(n);
  if (bits < 60) return std::log2(static_cast<double>(n));
  const unsigned shift = bits - 52;
  BigInt top = n >> shift;
  return std::log2(static_cast<double>(top)) + shift;
}

inline double log2_rational(const Rational& x) {
  return log2_big(boost::multiprecision::numerator(x)) -
         log2_big(boost::multiprecision::denominator(x));
}

}  // namespace internal

// Largest k with base^k <= x. Requires x > 0 and base > 1.
inline int64_t floor_log(const Rational& base, const Rational& x) {
  if (x <= 0 || base <= 1) throw Error("floor_log domain");
  const double est = internal::log2_rational(x) / internal::log2_rational(base);
  int64_t k = static_cast<int64_t>(std::floor(est));
  Rational p = rpow(base, k);
  while (p > x) {
    p /= base;
    --k;
  }
  while (p * base <= x) {
    p *= base;
    ++k;
  }
  return k;
}

// Smallest k with base^k >= x. Requires x > 0 and base > 1.
inline int64_t ceil_log(const Rational& base, const Rational& x) {
  const int64_t k = floor_log(base, x);
  return rpow(base, k) == x ? k : k + 1;
}

inline Rational epsilon_of(int64_t epsilon_inv) {
  return Rational(1, epsilon_inv);
}

inline std::string to_string(const Rational& r) { return r.str(); }

}  // namespace flowtime

#endif  // FLOWTIME_COMMON_HPP_

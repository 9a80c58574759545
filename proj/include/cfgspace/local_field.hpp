#pragma once

// Fixed-precision arithmetic in the p-adic field Q_p.
//
// A nonzero element is stored as p^val * (d0 + d1 p + d2 p^2 + ...) with
// d0 != 0 and exactly `precision` unit digits; digits past the precision are
// unknown and dropped, which is the p-adic analogue of rounding.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cfgspace {

class precision_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kDefaultPrecision = 32;
// valuations beyond this magnitude are reported as precision exhaustion
inline constexpr int kMaxValuation = 1 << 24;

inline bool is_prime(long long n) {
  if (n < 2) return false;
  for (long long d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

/// p-adic valuation of a nonzero integer.
inline int valuation_of(long long n, int p) {
  if (n == 0) throw std::invalid_argument("valuation of zero");
  int v = 0;
  while (n % p == 0) {
    n /= p;
    ++v;
  }
  return v;
}

class PAdicNumber {
 public:
  PAdicNumber() = default;

  static PAdicNumber zero(int prime, int precision = kDefaultPrecision) {
    check_prime(prime);
    PAdicNumber z;
    z.prime_ = prime;
    z.precision_ = precision;
    return z;
  }

  static PAdicNumber from_integer(long long n, int prime, int precision = kDefaultPrecision) {
    return from_rational(n, 1, prime, precision);
  }

  /// Expansion of num/den. Powers of p in either part move into the valuation;
  /// the remaining unit fraction is expanded digit by digit.
  static PAdicNumber from_rational(long long num, long long den, int prime,
                                   int precision = kDefaultPrecision) {
    check_prime(prime);
    if (precision < 1) throw std::invalid_argument("precision must be positive");
    if (den == 0) throw std::invalid_argument("zero denominator");
    if (num == 0) return zero(prime, precision);
    if (den < 0) {
      num = -num;
      den = -den;
    }
    int val = 0;
    while (num % prime == 0) {
      num /= prime;
      ++val;
    }
    while (den % prime == 0) {
      den /= prime;
      --val;
    }
    const long long g = std::gcd(num < 0 ? -num : num, den);
    num /= g;
    den /= g;
    const int den_inv = inverse_mod(static_cast<int>(den % prime), prime);

    PAdicNumber x;
    x.prime_ = prime;
    x.precision_ = precision;
    x.val_ = val;
    x.digits_.resize(static_cast<std::size_t>(precision));
    // Hensel-style long division; |rem| stays bounded by max(|num|, den).
    __int128 rem = num;
    for (int i = 0; i < precision; ++i) {
      long long r = static_cast<long long>(rem % prime);
      if (r < 0) r += prime;
      const int d = static_cast<int>((r * den_inv) % prime);
      x.digits_[static_cast<std::size_t>(i)] = d;
      rem = (rem - static_cast<__int128>(d) * den) / prime;
    }
    return x;
  }

  /// Builds p^val * sum digits[i] p^i, normalizing leading zeros into val.
  static PAdicNumber from_digits(int prime, int val, std::vector<int> digits,
                                 int precision = kDefaultPrecision) {
    check_prime(prime);
    for (int d : digits)
      if (d < 0 || d >= prime) throw std::invalid_argument("digit out of range");
    // the given digits are exact, so the zeros after them are known too
    std::size_t lead = 0;
    while (lead < digits.size() && digits[lead] == 0) ++lead;
    digits.resize(std::max(digits.size(), lead + static_cast<std::size_t>(precision)), 0);
    return normalize(prime, precision, val, std::move(digits));
  }

  int prime() const { return prime_; }
  int precision() const { return precision_; }
  bool is_zero() const { return digits_.empty(); }
  /// Valuation; +max for zero.
  int val() const { return is_zero() ? std::numeric_limits<int>::max() : val_; }
  const std::vector<int>& digits() const { return digits_; }

  /// |x|_p = p^{-val}, and 0 for zero.
  double abs() const {
    if (is_zero()) return 0.0;
    return std::pow(static_cast<double>(prime_), -static_cast<double>(val_));
  }

  PAdicNumber operator-() const {
    if (is_zero()) return *this;
    PAdicNumber r = *this;
    bool seen_nonzero = false;
    for (int& d : r.digits_) {
      if (!seen_nonzero) {
        if (d != 0) {
          d = prime_ - d;
          seen_nonzero = true;
        }
      } else {
        d = prime_ - 1 - d;
      }
    }
    return r;
  }

  friend PAdicNumber operator+(const PAdicNumber& x, const PAdicNumber& y) {
    check_compatible(x, y);
    if (x.is_zero()) return y;
    if (y.is_zero()) return x;
    const int lo = std::min(x.val_, y.val_);
    // digits are known up to (but excluding) the smaller absolute precision
    const int hi = std::min(x.val_ + x.precision_, y.val_ + y.precision_);
    // the window already bounds what is known; the cap only stops growth
    const int prec = std::max(x.precision_, y.precision_);
    std::vector<int> out(static_cast<std::size_t>(hi - lo), 0);
    int carry = 0;
    for (int e = lo; e < hi; ++e) {
      const int s = x.digit_at(e) + y.digit_at(e) + carry;
      out[static_cast<std::size_t>(e - lo)] = s % x.prime_;
      carry = s / x.prime_;
    }
    return normalize(x.prime_, prec, lo, std::move(out));
  }

  friend PAdicNumber operator-(const PAdicNumber& x, const PAdicNumber& y) {
    check_compatible(x, y);
    if (x == y) return zero(x.prime_, std::min(x.precision_, y.precision_));
    return x + (-y);
  }

  friend PAdicNumber operator*(const PAdicNumber& x, const PAdicNumber& y) {
    check_compatible(x, y);
    const int prec = std::min(x.precision_, y.precision_);
    if (x.is_zero() || y.is_zero()) return zero(x.prime_, prec);
    const long long val = static_cast<long long>(x.val_) + y.val_;
    if (val > kMaxValuation || val < -kMaxValuation)
      throw precision_error("valuation leaves the representable range");
    std::vector<long long> acc(static_cast<std::size_t>(prec), 0);
    for (int i = 0; i < prec; ++i) {
      const long long xi = x.digits_[static_cast<std::size_t>(i)];
      if (xi == 0) continue;
      for (int j = 0; i + j < prec; ++j)
        acc[static_cast<std::size_t>(i + j)] += xi * y.digits_[static_cast<std::size_t>(j)];
    }
    std::vector<int> out(static_cast<std::size_t>(prec));
    long long carry = 0;
    for (int i = 0; i < prec; ++i) {
      const long long s = acc[static_cast<std::size_t>(i)] + carry;
      out[static_cast<std::size_t>(i)] = static_cast<int>(s % x.prime_);
      carry = s / x.prime_;
    }
    return normalize(x.prime_, prec, static_cast<int>(val), std::move(out));
  }

  /// Multiplies by p^k (the uniformizer power); exact.
  PAdicNumber shifted(int k) const {
    if (is_zero()) return *this;
    const long long v = static_cast<long long>(val_) + k;
    if (v > kMaxValuation || v < -kMaxValuation)
      throw precision_error("valuation leaves the representable range");
    PAdicNumber r = *this;
    r.val_ = static_cast<int>(v);
    return r;
  }

  /// The digit multiplying p^e (absolute position); zero outside the stored window.
  int digit_at(int e) const {
    if (is_zero() || e < val_ || e >= val_ + precision_) return 0;
    return digits_[static_cast<std::size_t>(e - val_)];
  }

  /// Truncation x mod p^e, i.e. the part of the expansion with exponents < e.
  PAdicNumber truncated_below(int e) const {
    if (is_zero() || e <= val_) return zero(prime_, precision_);
    std::vector<int> d = digits_;
    for (std::size_t i = static_cast<std::size_t>(std::min(e - val_, precision_)); i < d.size(); ++i)
      d[i] = 0;
    return normalize(prime_, precision_, val_, std::move(d));
  }

  friend bool operator==(const PAdicNumber& a, const PAdicNumber& b) {
    if (a.prime_ != b.prime_) return false;
    if (a.is_zero() || b.is_zero()) return a.is_zero() && b.is_zero();
    if (a.val_ != b.val_) return false;
    // agreement on every digit both operands know
    const auto n = std::min(a.digits_.size(), b.digits_.size());
    return std::equal(a.digits_.begin(), a.digits_.begin() + static_cast<std::ptrdiff_t>(n), b.digits_.begin());
  }

  /// Canonical total order: larger valuation first (zero is smallest in
  /// absolute value, so it leads), then digit sequences lexicographically.
  friend std::strong_ordering canonical_compare(const PAdicNumber& a, const PAdicNumber& b) {
    if (a.is_zero() || b.is_zero()) {
      if (a.is_zero() && b.is_zero()) return std::strong_ordering::equal;
      return a.is_zero() ? std::strong_ordering::less : std::strong_ordering::greater;
    }
    if (a.val_ != b.val_) return b.val_ <=> a.val_;
    const auto n = std::min(a.digits_.size(), b.digits_.size());
    for (std::size_t i = 0; i < n; ++i)
      if (a.digits_[i] != b.digits_[i]) return a.digits_[i] <=> b.digits_[i];
    return std::strong_ordering::equal;
  }

  /// "p:val:d0d1d2..." with digits in base-36 characters for p <= 36 and
  /// comma-separated decimals otherwise; zero is "p:zero".
  std::string to_string() const {
    std::string s = std::to_string(prime_) + ":";
    if (is_zero()) return s + "zero:" + std::to_string(precision_);
    s += std::to_string(val_) + ":";
    for (std::size_t i = 0; i < digits_.size(); ++i) {
      if (prime_ <= 36) {
        const int d = digits_[i];
        s += static_cast<char>(d < 10 ? '0' + d : 'a' + (d - 10));
      } else {
        if (i) s += ',';
        s += std::to_string(digits_[i]);
      }
    }
    return s;
  }

  static PAdicNumber parse(std::string_view text) {
    const auto c1 = text.find(':');
    const auto c2 = c1 == std::string_view::npos ? c1 : text.find(':', c1 + 1);
    if (c2 == std::string_view::npos) throw std::invalid_argument("malformed p-adic literal: " + std::string(text));
    const int prime = parse_int(text.substr(0, c1));
    const auto mid = text.substr(c1 + 1, c2 - c1 - 1);
    const auto tail = text.substr(c2 + 1);
    if (mid == "zero") return zero(prime, parse_int(tail));
    const int val = parse_int(mid);
    std::vector<int> digits;
    if (prime <= 36) {
      for (char ch : tail) {
        int d = -1;
        if (ch >= '0' && ch <= '9') d = ch - '0';
        else if (ch >= 'a' && ch <= 'z') d = ch - 'a' + 10;
        if (d < 0 || d >= prime) throw std::invalid_argument("bad p-adic digit in: " + std::string(text));
        digits.push_back(d);
      }
    } else {
      std::size_t pos = 0;
      while (pos <= tail.size()) {
        auto next = tail.find(',', pos);
        if (next == std::string_view::npos) next = tail.size();
        digits.push_back(parse_int(tail.substr(pos, next - pos)));
        pos = next + 1;
      }
    }
    if (digits.empty() || digits.front() == 0)
      throw std::invalid_argument("non-canonical p-adic literal: " + std::string(text));
    const int prec = static_cast<int>(digits.size());
    return from_digits(prime, val, std::move(digits), prec);
  }

 private:
  static void check_prime(int p) {
    if (!is_prime(p)) throw std::invalid_argument("not a prime: " + std::to_string(p));
  }

  static void check_compatible(const PAdicNumber& x, const PAdicNumber& y) {
    if (x.prime_ != y.prime_) throw std::invalid_argument("p-adic operands over different primes");
  }

  static int parse_int(std::string_view s) {
    if (s.empty()) throw std::invalid_argument("empty integer field");
    std::size_t used = 0;
    const int v = std::stoi(std::string(s), &used);
    if (used != s.size()) throw std::invalid_argument("bad integer field: " + std::string(s));
    return v;
  }

  static int inverse_mod(int a, int p) {
    // p is prime and small, Fermat is plenty
    long long r = 1, b = a % p, e = p - 2;
    while (e > 0) {
      if (e & 1) r = r * b % p;
      b = b * b % p;
      e >>= 1;
    }
    return static_cast<int>(r);
  }

  static PAdicNumber normalize(int prime, int precision, int val, std::vector<int> digits) {
    std::size_t lead = 0;
    while (lead < digits.size() && digits[lead] == 0) ++lead;
    PAdicNumber x;
    x.prime_ = prime;
    if (lead == digits.size()) {  // vanished within the known digits
      x.precision_ = precision;
      return x;
    }
    const long long v = static_cast<long long>(val) + static_cast<long long>(lead);
    if (v > kMaxValuation || v < -kMaxValuation)
      throw precision_error("valuation leaves the representable range");
    x.val_ = static_cast<int>(v);
    // keep only digits that are actually known, capped at the precision
    const auto known = std::min(digits.size() - lead, static_cast<std::size_t>(precision));
    x.digits_.assign(digits.begin() + static_cast<std::ptrdiff_t>(lead),
                     digits.begin() + static_cast<std::ptrdiff_t>(lead + known));
    x.precision_ = static_cast<int>(known);
    return x;
  }

  int prime_ = 2;
  int precision_ = kDefaultPrecision;
  int val_ = 0;
  std::vector<int> digits_;  // empty <=> zero
};

inline double padic_abs(const PAdicNumber& x) { return x.abs(); }

/// A power p^{-exponent} of the prime, or exact zero. Distances and volumes in
/// the non-Archimedean geometry live in this discrete group, so comparisons
/// are integer comparisons and never round.
class PowerOfP {
 public:
  PowerOfP() = default;
  PowerOfP(int prime, int exponent) : prime_(prime), exponent_(exponent), zero_(false) {}
  static PowerOfP zero(int prime) {
    PowerOfP z;
    z.prime_ = prime;
    z.zero_ = true;
    return z;
  }
  static PowerOfP of(const PAdicNumber& x) {
    return x.is_zero() ? zero(x.prime()) : PowerOfP(x.prime(), x.val());
  }

  int prime() const { return prime_; }
  bool is_zero() const { return zero_; }
  /// The exponent e with value p^{-e}; meaningless for zero.
  int exponent() const { return exponent_; }
  double value() const {
    return zero_ ? 0.0 : std::pow(static_cast<double>(prime_), -static_cast<double>(exponent_));
  }

  friend bool operator==(const PowerOfP& a, const PowerOfP& b) {
    if (a.zero_ || b.zero_) return a.zero_ == b.zero_;
    return a.exponent_ == b.exponent_;
  }
  friend std::strong_ordering operator<=>(const PowerOfP& a, const PowerOfP& b) {
    if (a.zero_ || b.zero_) {
      if (a.zero_ && b.zero_) return std::strong_ordering::equal;
      return a.zero_ ? std::strong_ordering::less : std::strong_ordering::greater;
    }
    return b.exponent_ <=> a.exponent_;
  }
  /// Ratio a / b; b must be nonzero.
  friend PowerOfP operator/(const PowerOfP& a, const PowerOfP& b) {
    if (b.zero_) throw std::domain_error("division by zero distance");
    if (a.zero_) return zero(a.prime_);
    return PowerOfP(a.prime_, a.exponent_ - b.exponent_);
  }
  friend PowerOfP operator*(const PowerOfP& a, const PowerOfP& b) {
    if (a.zero_ || b.zero_) return zero(a.prime_);
    return PowerOfP(a.prime_, a.exponent_ + b.exponent_);
  }

 private:
  int prime_ = 2;
  int exponent_ = 0;
  bool zero_ = true;
};

inline PowerOfP max(const PowerOfP& a, const PowerOfP& b) { return a < b ? b : a; }
inline PowerOfP min(const PowerOfP& a, const PowerOfP& b) { return a < b ? a : b; }

/// Closed ball B(center, p^{-radius_exp}) in Q_p^k under the max norm.
/// Radii are kept as integer exponents; every ball is clopen.
struct PadicBall {
  std::vector<PAdicNumber> center;
  int radius_exp = 0;

  int prime() const { return center.empty() ? 2 : center.front().prime(); }
  std::size_t dimension() const { return center.size(); }
  PowerOfP radius() const { return PowerOfP(prime(), radius_exp); }

  bool contains(const std::vector<PAdicNumber>& x) const {
    if (x.size() != center.size()) throw std::invalid_argument("ball/point dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto diff = x[i] - center[i];
      if (!diff.is_zero() && diff.val() < radius_exp) return false;
    }
    return true;
  }
  bool contains(const PadicBall& other) const {
    return other.radius_exp >= radius_exp && contains(other.center);
  }
  bool disjoint(const PadicBall& other) const {
    return !contains(other.center) && !other.contains(center);
  }

  /// The p^k sub-balls of radius p^{-(radius_exp+1)}.
  std::vector<PadicBall> children() const {
    const int p = prime();
    const int prec = center.empty() ? kDefaultPrecision : center.front().precision();
    std::vector<PadicBall> out;
    const std::size_t k = center.size();
    std::size_t total = 1;
    for (std::size_t i = 0; i < k; ++i) total *= static_cast<std::size_t>(p);
    out.reserve(total);
    for (std::size_t code = 0; code < total; ++code) {
      PadicBall child{center, radius_exp + 1};
      std::size_t c = code;
      for (std::size_t i = 0; i < k; ++i) {
        const int digit = static_cast<int>(c % static_cast<std::size_t>(p));
        c /= static_cast<std::size_t>(p);
        // x lies in the child iff x = center mod p^r and digit r of x is `digit`
        child.center[i] = center[i].truncated_below(radius_exp) +
                          PAdicNumber::from_integer(digit, p, prec).shifted(radius_exp);
      }
      out.push_back(std::move(child));
    }
    return out;
  }
};

/// Haar volume of a ball in Q_p^k, normalized so the unit ball has volume 1.
inline PowerOfP haar_volume_exact(const PadicBall& b) {
  const long long e = static_cast<long long>(b.radius_exp) * static_cast<long long>(b.dimension());
  if (e > kMaxValuation || e < -kMaxValuation) throw precision_error("ball volume out of range");
  return PowerOfP(b.prime(), static_cast<int>(e));
}

inline double haar_volume(const PadicBall& b) { return haar_volume_exact(b).value(); }

/// Haar volume for a radius given as a real; the radius must be a power of p.
inline double haar_volume(int prime, std::size_t dimension, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("radius must be positive");
  const double e = -std::log(radius) / std::log(static_cast<double>(prime));
  const double er = std::round(e);
  if (std::abs(e - er) > 1e-9 ||
      std::abs(std::pow(static_cast<double>(prime), -er) - radius) > 1e-12 * radius)
    throw std::invalid_argument("radius is not in the valuation group");
  return std::pow(static_cast<double>(prime), -er * static_cast<double>(dimension));
}

}  // namespace cfgspace

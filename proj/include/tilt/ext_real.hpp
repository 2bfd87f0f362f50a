#ifndef TILT_EXT_REAL_HPP
#define TILT_EXT_REAL_HPP

#include <cmath>
#include <compare>
#include <stdexcept>
#include <string>

namespace tilt {

// Extended real number: a finite double or one of the two infinities.
// The infinite states are explicit tags; the payload is meaningless for them.
class ExtReal {
public:
  enum class Kind { finite, pos_inf, neg_inf };

  constexpr ExtReal() = default;
  constexpr ExtReal(double v) : kind_(Kind::finite), value_(v) {}

  static constexpr ExtReal pos_inf() { return ExtReal(Kind::pos_inf); }
  static constexpr ExtReal neg_inf() { return ExtReal(Kind::neg_inf); }

  // Maps IEEE infinities onto the tagged states; NaN is rejected.
  static ExtReal from_double(double v) {
    if (std::isnan(v)) throw std::domain_error("ExtReal: NaN");
    if (std::isinf(v)) return v > 0 ? pos_inf() : neg_inf();
    return ExtReal(v);
  }

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_finite() const { return kind_ == Kind::finite; }
  constexpr bool is_pos_inf() const { return kind_ == Kind::pos_inf; }
  constexpr bool is_neg_inf() const { return kind_ == Kind::neg_inf; }

  double value() const {
    if (!is_finite()) throw std::domain_error("ExtReal: value() of an infinite quantity");
    return value_;
  }

  // IEEE view, for arithmetic that is allowed to saturate.
  double to_double() const {
    switch (kind_) {
      case Kind::pos_inf: return HUGE_VAL;
      case Kind::neg_inf: return -HUGE_VAL;
      default: return value_;
    }
  }

  std::string to_string() const;

  friend ExtReal operator+(ExtReal a, ExtReal b) {
    if ((a.is_pos_inf() && b.is_neg_inf()) || (a.is_neg_inf() && b.is_pos_inf()))
      throw std::domain_error("ExtReal: +inf + -inf");
    if (a.is_pos_inf() || b.is_pos_inf()) return pos_inf();
    if (a.is_neg_inf() || b.is_neg_inf()) return neg_inf();
    return ExtReal(a.value_ + b.value_);
  }
  ExtReal& operator+=(ExtReal o) { return *this = *this + o; }
  friend ExtReal operator-(ExtReal a) {
    if (a.is_pos_inf()) return neg_inf();
    if (a.is_neg_inf()) return pos_inf();
    return ExtReal(-a.value_);
  }
  friend ExtReal operator-(ExtReal a, ExtReal b) { return a + (-b); }

  // Multiplication by a finite nonnegative scalar; 0 * inf := 0.
  friend ExtReal scale(double c, ExtReal a) {
    if (c < 0) return scale(-c, -a);
    if (a.is_finite()) return ExtReal(c * a.value_);
    if (c == 0) return ExtReal(0.0);
    return a;
  }

  friend std::partial_ordering operator<=>(ExtReal a, ExtReal b) {
    return a.to_double() <=> b.to_double();
  }
  friend bool operator==(ExtReal a, ExtReal b) {
    return a.kind_ == b.kind_ && (!a.is_finite() || a.value_ == b.value_);
  }

private:
  constexpr explicit ExtReal(Kind k) : kind_(k) {}
  Kind kind_ = Kind::finite;
  double value_ = 0.0;
};

inline std::string ExtReal::to_string() const {
  if (is_pos_inf()) return "+inf";
  if (is_neg_inf()) return "-inf";
  return std::to_string(value_);
}

}  // namespace tilt

#endif

#pragma once

#include <array>
#include <span>

#include "koopgrip/signal_core.hpp"

namespace koopgrip {

/// Raw dynamometer reading to force: sum_i c_i * g_r^(i+1), no constant term.
struct CalibrationPolynomial {
    std::array<double, 4> coefficients{1.0629, -2.5880e-4, -9.0028e-8, 7.6152e-10};

    double operator()(double raw) const;
    double derivative(double raw) const;
    /// Newton inversion on the monotone branch; force in N.
    double inverse(double force) const;
};

double calibrate_dynamometer(double raw, const CalibrationPolynomial& poly = {});
TimestampedSeries calibrate_dynamometer(const TimestampedSeries& raw, const CalibrationPolynomial& poly = {});

/// Subtracts the mean of values with t < t0 + zeroWindow.
TimestampedSeries zero_offset(const TimestampedSeries& series, double zeroWindowSeconds = 5.0);

class MinMaxScaler {
public:
    MinMaxScaler() = default;
    MinMaxScaler(double lo, double hi);

    static MinMaxScaler fit(std::span<const double> data);

    double apply(double x) const { return (x - lo_) / (hi_ - lo_); }
    double invert(double y) const { return lo_ + y * (hi_ - lo_); }

    double lo() const { return lo_; }
    double hi() const { return hi_; }

private:
    double lo_ = 0.0;
    double hi_ = 1.0;
};

}  // namespace koopgrip

#include "koopgrip/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "koopgrip/errors.hpp"

namespace koopgrip {

double CalibrationPolynomial::operator()(double raw) const {
    const auto& c = coefficients;
    return raw * (c[0] + raw * (c[1] + raw * (c[2] + raw * c[3])));
}

double CalibrationPolynomial::derivative(double raw) const {
    const auto& c = coefficients;
    return c[0] + raw * (2.0 * c[1] + raw * (3.0 * c[2] + raw * 4.0 * c[3]));
}

double CalibrationPolynomial::inverse(double force) const {
    double x = force / coefficients[0];
    for (int it = 0; it < 50; ++it) {
        const double step = ((*this)(x) - force) / derivative(x);
        x -= step;
        if (std::abs(step) <= 1e-13 * (1.0 + std::abs(x))) break;
    }
    return x;
}

double calibrate_dynamometer(double raw, const CalibrationPolynomial& poly) { return poly(raw); }

TimestampedSeries calibrate_dynamometer(const TimestampedSeries& raw, const CalibrationPolynomial& poly) {
    TimestampedSeries out = raw;
    for (auto& v : out.values) v = poly(v);
    return out;
}

TimestampedSeries zero_offset(const TimestampedSeries& series, double zeroWindowSeconds) {
    series.validate();
    if (series.empty() || series.times.back() - series.times.front() < zeroWindowSeconds)
        throw InputError("recording shorter than the zeroing window");
    const double cutoff = series.times.front() + zeroWindowSeconds;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < series.size() && series.times[i] < cutoff; ++i, ++n) sum += series.values[i];
    const double offset = sum / static_cast<double>(n);
    TimestampedSeries out = series;
    for (auto& v : out.values) v -= offset;
    return out;
}

MinMaxScaler::MinMaxScaler(double lo, double hi) : lo_(lo), hi_(hi) {
    if (!(hi > lo)) throw NumericError("degenerate min-max scaler: hi must exceed lo");
}

MinMaxScaler MinMaxScaler::fit(std::span<const double> data) {
    if (data.empty()) throw InputError("cannot fit scaler on empty data");
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    return MinMaxScaler(*lo, *hi);
}

}  // namespace koopgrip

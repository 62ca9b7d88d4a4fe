#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "koopgrip/io.hpp"

namespace koopgrip {

struct SynthProfile {
    std::vector<double> levels{1.0, 0.75, 0.5, 0.25, 0.0};  // fractions of maxForce
    double restDuration = 5.0;     // initial zero-force segment (s)
    double plateauDuration = 3.5;  // s
    double rampDuration = 1.0;     // s
    double totalDuration = 30.0;   // s
    double maxForce = 300.0;       // N
    double emgLag = 0.05;          // EMG envelope follows force with this delay (s)
    double noiseSnr = 20.0;        // full-activation amplitude over noise floor
    double mainsAmplitude = 0.05;  // mV at 50 Hz
    double driftAmplitude = 0.1;   // mV, slow baseline wander
    double emgGain = 1.0;          // mV at full activation
    double dynamometerOffset = 3.7;  // N added before the raw reading
    double gripNoise = 0.2;        // N
    double emgRate = kNominalEmgRate;
    double gripRate = 200.0;
    RecordingMeta meta;

    void validate() const;
};

/// Force (N) of the trapezoidal profile at time t.
double profile_force(const SynthProfile& profile, double t);

/// Grip holds raw dynamometer readings (calibrate + zero to recover force).
Recording synth_recording(const SynthProfile& profile, std::uint64_t seed);

/// True force at the given times.
TimestampedSeries true_force(const SynthProfile& profile, std::span<const double> times);

}  // namespace koopgrip

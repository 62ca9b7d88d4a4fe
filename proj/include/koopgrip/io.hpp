#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "koopgrip/signal_core.hpp"

namespace koopgrip {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& text);

struct RecordingMeta {
    std::string subject = "synthetic";
    std::string position = "1";
    int replication = 1;
};

struct Recording {
    TimestampedSeries emg;   // mV, ~992.97 Hz
    TimestampedSeries grip;  // raw dynamometer reading, 200 Hz
    RecordingMeta meta;
};

/// "t_s,value" rows with a header line; lines starting with '#' carry metadata.
void write_series(std::ostream& os, const TimestampedSeries& series, const RecordingMeta* meta = nullptr);
TimestampedSeries read_series(std::istream& is, RecordingMeta* meta = nullptr);

void write_series_file(const std::filesystem::path& path, const TimestampedSeries& series,
                       const RecordingMeta* meta = nullptr);
TimestampedSeries read_series_file(const std::filesystem::path& path, RecordingMeta* meta = nullptr);

/// `<stem>_emg.csv` and `<stem>_grip.csv`.
void write_recording(const std::filesystem::path& stem, const Recording& rec);
Recording read_recording(const std::filesystem::path& stem);

/// One "frequency_hz<TAB>gain" line per bin.
void write_mask(std::ostream& os, const SpectralMask& mask);
SpectralMask read_mask(std::istream& is);

/// INI-style "key = value" with "[section]" headers; keys flattened to "section.key".
class Config {
public:
    static Config parse(std::istream& is);
    static Config load(const std::filesystem::path& path);

    std::optional<std::string> get(const std::string& key) const;
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    /// Flag (if given) > config file > fallback.
    template <class T>
    T resolve(const std::string& key, const std::optional<T>& flag, T fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

template <>
double Config::resolve<double>(const std::string&, const std::optional<double>&, double) const;
template <>
int Config::resolve<int>(const std::string&, const std::optional<int>&, int) const;
template <>
std::string Config::resolve<std::string>(const std::string&, const std::optional<std::string>&, std::string) const;

}  // namespace koopgrip

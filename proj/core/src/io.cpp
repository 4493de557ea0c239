#include "squeezelab/io.hpp"

#include <cstdio>
#include <fstream>

#include "squeezelab/errors.hpp"

namespace squeezelab::io {
namespace {

constexpr double kDbFloor = -300.0;

void append_num(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  out += buf;
}

double db_or_floor(double linear) {
  if (!(linear > 0.0)) return kDbFloor;
  const double db = to_db(linear);
  return db < kDbFloor ? kDbFloor : db;
}

}  // namespace

std::string time_series_csv(const TimeSeries& series) {
  std::string out = "time_s,value\n";
  out.reserve(out.size() + series.samples.size() * 28);
  const double dt = series.sample_rate > 0.0 ? 1.0 / series.sample_rate : 0.0;
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    append_num(out, series.start_time + static_cast<double>(i) * dt);
    out += ',';
    append_num(out, series.samples[i]);
    out += '\n';
  }
  return out;
}

std::string spectrum_csv(const Spectrum& spectrum) {
  std::string out = "frequency_hz,value,value_db_rel_snl\n";
  out.reserve(out.size() + spectrum.frequency_hz.size() * 42);
  for (std::size_t i = 0; i < spectrum.frequency_hz.size(); ++i) {
    append_num(out, spectrum.frequency_hz[i]);
    out += ',';
    append_num(out, spectrum.value[i]);
    out += ',';
    append_num(out, db_or_floor(spectrum.value[i]));
    out += '\n';
  }
  return out;
}

std::string variance_table_csv(const std::vector<double>& frequency_hz,
                               const std::vector<double>& v_minus,
                               const std::vector<double>& v_plus) {
  std::string out = "frequency_hz,v_minus,v_plus,v_minus_db,v_plus_db\n";
  out.reserve(out.size() + frequency_hz.size() * 70);
  for (std::size_t i = 0; i < frequency_hz.size(); ++i) {
    append_num(out, frequency_hz[i]);
    out += ',';
    append_num(out, v_minus[i]);
    out += ',';
    append_num(out, v_plus[i]);
    out += ',';
    append_num(out, db_or_floor(v_minus[i]));
    out += ',';
    append_num(out, db_or_floor(v_plus[i]));
    out += '\n';
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SchemaError("cannot open output file for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw SchemaError("failed writing output file: " + path);
}

}  // namespace squeezelab::io

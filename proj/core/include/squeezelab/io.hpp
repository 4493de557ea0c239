#pragma once

#include <string>
#include <vector>

#include "squeezelab/types.hpp"

namespace squeezelab::io {

// All writers emit deterministic bytes: fixed column order, 12 significant
// digits, '\n' line endings, no locale dependence. Identical inputs always
// produce identical files.

// Columns: time_s,value
std::string time_series_csv(const TimeSeries& series);

// Columns: frequency_hz,value,value_db_rel_snl
std::string spectrum_csv(const Spectrum& spectrum);

// Columns: frequency_hz,v_minus,v_plus,v_minus_db,v_plus_db
std::string variance_table_csv(const std::vector<double>& frequency_hz,
                               const std::vector<double>& v_minus,
                               const std::vector<double>& v_plus);

// Create/overwrite path with exactly these bytes; throws SchemaError on I/O
// failure (the caller chose the path, not the physics).
void write_file(const std::string& path, const std::string& content);

}  // namespace squeezelab::io

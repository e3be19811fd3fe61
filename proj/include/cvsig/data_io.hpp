#pragma once

#include <filesystem>
#include <vector>

#include "cvsig/preprocess.hpp"

namespace cvsig::data {

// Minute CSV: person_id,window_label,minute_index,steps,heart_rate,sleep_state
// with empty cells for missing values. Rows of one (person, window) pair are
// contiguous and ordered by minute_index starting at 0.
void write_minute_csv(const std::filesystem::path& path, const std::vector<RawMinuteSeries>& series);
std::vector<RawMinuteSeries> read_minute_csv(const std::filesystem::path& path);

// persons.csv: person_id,age,bmi,rhr,split
void write_persons_csv(const std::filesystem::path& path, const std::vector<PersonMeta>& persons);
std::vector<PersonMeta> read_persons_csv(const std::filesystem::path& path);

// JSON array of {person_id, window_label, hr_mean, hr_std, steps, asleep,
// restless, hr, loss_mask}.
void write_preprocessed_json(const std::filesystem::path& path, const std::vector<PreprocessedSeries>& series);
std::vector<PreprocessedSeries> read_preprocessed_json(const std::filesystem::path& path);

}  // namespace cvsig::data

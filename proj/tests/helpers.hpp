#pragma once

#include "madrs/catalog.hpp"
#include "madrs/synth.hpp"
#include "madrs/transcript.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace testing {

inline const madrs::Catalog& catalog() {
    static const madrs::Catalog c = madrs::Catalog::load(madrs::default_catalog_path());
    return c;
}

inline const madrs::MarkerTable& markers() {
    static const madrs::MarkerTable m = madrs::MarkerTable::load(madrs::default_markers_path());
    return m;
}

/// Speaker/text pairs; 'C' for clinician, anything else for patient.
inline madrs::Transcript make_transcript(const std::string& id, const std::string& patient, int visit,
                                         const std::vector<std::pair<char, std::string>>& turns,
                                         std::optional<madrs::ItemScores> scores = std::nullopt) {
    madrs::Transcript t;
    t.meta.interview_id = id;
    t.meta.patient_id = patient;
    t.meta.visit_number = visit;
    for (const auto& [who, text] : turns)
        t.utterances.push_back({t.utterances.size(), who == 'C' ? madrs::Speaker::Clinician : madrs::Speaker::Patient, text});
    t.clinician_scores = scores;
    return t;
}

inline madrs::ItemScores uniform_scores(int v) {
    madrs::ItemScores s;
    for (auto& x : s) x = v;
    return s;
}

/// Fresh empty directory under the system temp dir.
inline std::string temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("madrs_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

} // namespace testing

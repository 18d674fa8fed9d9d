#pragma once

// Conflict-rigged 20-query fixture shared by the pipeline tests and the
// acceptance suite. Every query carries a gold answer; conflict queries put a
// lexically query-heavy wrong document ahead of a credible gold-supporting
// one, so a pipeline that resolves conflicts answers correctly while plain
// concatenation answers from the wrong document.

#include <cstdio>
#include <string>
#include <vector>

#include "conflictrag/dataset.hpp"
#include "conflictrag/types.hpp"

namespace fixtures {

inline std::vector<conflictrag::DatasetRecord> rigged_dataset() {
    using conflictrag::ConflictType;
    using conflictrag::DatasetRecord;
    using conflictrag::Date;
    using conflictrag::Document;
    using conflictrag::DocumentPair;
    using conflictrag::GoldConflict;

    std::vector<DatasetRecord> records;

    struct FactualSpec {
        const char* topic;
        const char* wrong_value;
        const char* gold_value;
    };
    const FactualSpec factual[] = {
        {"daily vitamin d dose for adults", "400 IU", "600 IU"},
        {"recommended water intake in liters", "1.5 liters", "2.7 liters"},
        {"adult resting heart rate upper bound", "90 bpm", "100 bpm"},
        {"minimum sleep hours for teenagers", "6 hours", "8 hours"},
        {"daily sodium limit in milligrams", "3500 mg", "2300 mg"},
        {"standard marathon distance in kilometers", "41 km", "42.195 km"},
        {"boiling point of water at altitude 2000m", "98 degrees", "93 degrees"},
        {"recommended calcium intake for seniors", "800 mg", "1200 mg"},
    };
    int id = 0;
    for (const FactualSpec& spec : factual) {
        DatasetRecord record;
        char qid[16];
        std::snprintf(qid, sizeof(qid), "fact-%02d", ++id);
        record.query.id = qid;
        record.query.text = std::string("What is the ") + spec.topic + "?";
        record.query.gold_answer = spec.gold_value;
        record.query.gold_conflicts =
            std::vector<GoldConflict>{{DocumentPair{0, 1}, ConflictType::Factual}};
        record.documents = {
            // Wrong answer, phrased to win the lexical ranking.
            {std::string(qid) + "-wrong",
             std::string("The ") + spec.topic + " is " + spec.wrong_value + ". The " + spec.topic +
                 " was settled long ago.",
             "personal-blog", Date::parse("2008-03-01"), std::nullopt},
            {std::string(qid) + "-gold",
             std::string("Current guidance puts the ") + spec.topic + " at " + spec.gold_value +
                 ". This reflects the latest review.",
             "national-health-agency", Date::parse("2023-05-10"), std::nullopt},
            {std::string(qid) + "-filler",
             "Background reading on general wellness and lifestyle habits without firm figures.",
             "lifestyle-magazine", std::nullopt, std::nullopt},
        };
        records.push_back(std::move(record));
    }

    struct TemporalSpec {
        const char* topic;
        const char* old_claim;
        const char* new_claim;
        const char* gold;
    };
    const TemporalSpec temporal[] = {
        {"screening interval for adults", "As of 2009, the screening interval for adults was ten "
                                          "years under the screening interval for adults policy.",
         "As of 2023, the screening interval for adults is five years.", "five years"},
        {"visa processing time", "As of 2012, the visa processing time was twelve weeks under the "
                                 "visa processing time rules.",
         "As of 2024, the visa processing time is three weeks.", "three weeks"},
        {"speed limit on rural roads", "As of 2005, the speed limit on rural roads was ninety "
                                       "under the speed limit on rural roads code.",
         "As of 2022, the speed limit on rural roads is eighty.", "eighty"},
        {"retirement age", "As of 2001, the retirement age was sixty under the retirement age "
                           "act.",
         "As of 2021, the retirement age is sixty-seven.", "sixty seven"},
    };
    id = 0;
    for (const TemporalSpec& spec : temporal) {
        DatasetRecord record;
        char qid[16];
        std::snprintf(qid, sizeof(qid), "temp-%02d", ++id);
        record.query.id = qid;
        record.query.text = std::string("What is the ") + spec.topic + "?";
        record.query.gold_answer = spec.gold;
        record.query.gold_conflicts =
            std::vector<GoldConflict>{{DocumentPair{0, 1}, ConflictType::Temporal}};
        record.documents = {
            {std::string(qid) + "-old", spec.old_claim, "archive-news",
             Date::parse("2009-01-01"), std::nullopt},
            {std::string(qid) + "-new", spec.new_claim, "government-portal",
             Date::parse("2023-09-01"), std::nullopt},
        };
        records.push_back(std::move(record));
    }

    struct OpinionSpec {
        const char* topic;
        const char* view_a;
        const char* view_b;
        const char* gold;  // tokens present in both leading sentences
    };
    const OpinionSpec opinion[] = {
        {"remote work policy", "Critics argue the remote work policy weakens team culture.",
         "Proponents argue the remote work policy improves team focus.", "remote work policy"},
        {"city congestion charge", "Critics argue the city congestion charge burdens commuters.",
         "Proponents argue the city congestion charge funds transit.", "city congestion charge"},
        {"open plan offices", "Critics argue open plan offices hurt concentration badly.",
         "Proponents argue open plan offices help collaboration greatly.", "open plan offices"},
        {"homework in schools", "Critics argue homework in schools adds stress.",
         "Proponents argue homework in schools builds discipline.", "homework in schools"},
    };
    id = 0;
    for (const OpinionSpec& spec : opinion) {
        DatasetRecord record;
        char qid[16];
        std::snprintf(qid, sizeof(qid), "opin-%02d", ++id);
        record.query.id = qid;
        record.query.text = std::string("What do people think of the ") + spec.topic + "?";
        record.query.gold_answer = spec.gold;
        record.query.gold_conflicts =
            std::vector<GoldConflict>{{DocumentPair{0, 1}, ConflictType::Opinion}};
        record.documents = {
            {std::string(qid) + "-a", spec.view_a, "editorial-desk", std::nullopt, std::nullopt},
            {std::string(qid) + "-b", spec.view_b, "columnist-weekly", std::nullopt, std::nullopt},
        };
        records.push_back(std::move(record));
    }

    struct PlainSpec {
        const char* question;
        const char* text_a;
        const char* text_b;
        const char* gold;
    };
    const PlainSpec plain[] = {
        {"When does the lantern festival take place?",
         "The lantern festival takes place in spring.",
         "Visitors confirm the lantern festival takes place in spring.", "spring"},
        {"Where is the maritime museum located?", "The maritime museum is located in the old "
                                                  "harbor district.",
         "Guides note the maritime museum is located in the old harbor district.",
         "old harbor district"},
        {"What color is the cathedral roof?", "The cathedral roof is copper green.",
         "Postcards show the cathedral roof is copper green.", "copper green"},
        {"Which river crosses the capital?", "The silver river crosses the capital.",
         "Maps show the silver river crosses the capital.", "silver river"},
    };
    id = 0;
    for (const PlainSpec& spec : plain) {
        DatasetRecord record;
        char qid[16];
        std::snprintf(qid, sizeof(qid), "none-%02d", ++id);
        record.query.id = qid;
        record.query.text = spec.question;
        record.query.gold_answer = spec.gold;
        record.query.gold_conflicts = std::vector<GoldConflict>{};  // labeled: no conflicts
        record.documents = {
            {std::string(qid) + "-a", spec.text_a, "city-guide", std::nullopt, std::nullopt},
            {std::string(qid) + "-b", spec.text_b, "tourism-board", std::nullopt, std::nullopt},
        };
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace fixtures

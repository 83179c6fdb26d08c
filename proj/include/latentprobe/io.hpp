#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "latentprobe/hin.hpp"
#include "latentprobe/probe.hpp"
#include "latentprobe/recommend.hpp"

namespace lp::io {

// Attribute CSV: header `entity_id,<name>...`; empty fields or `nan` mean the
// attribute is missing for that entity. Entities absent from the file are
// uncovered everywhere.
probe::AttributeTable load_attributes_csv(const std::filesystem::path& path,
                                          const hin::HinGraph& graph);
void write_attributes_csv(const probe::AttributeTable& table,
                          const hin::HinGraph& graph,
                          const std::filesystem::path& path);

// Topic CSV: header `entity_id,t0..t{T-1}`; rows are distributions over T
// topics. Entities absent from the file get NaN rows (uncovered).
rec::TopicTable load_topics_csv(const std::filesystem::path& path,
                                const hin::HinGraph& graph);
void write_topics_csv(const rec::TopicTable& topics, const hin::HinGraph& graph,
                      const std::filesystem::path& path);

// Token lists: `entity_id<TAB>token`, one pair per line.
std::vector<std::vector<std::string>> load_tokens_tsv(
    const std::filesystem::path& path, const hin::HinGraph& graph);

}  // namespace lp::io

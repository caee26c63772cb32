#pragma once

#include <string>

#include "json.hpp"

#include "icl/baselines.hpp"
#include "icl/mixprior.hpp"
#include "icl/taskgen.hpp"

namespace icl {

using Json = nlohmann::json;

inline constexpr const char* kInstanceSchema = "icl-lab.retrieval-instance/1";

Json to_json(const Vec& v);
Vec vec_from_json(const Json& j, const std::string& path);
Json to_json(const Mat& m);  // array of rows
Mat mat_from_json(const Json& j, const std::string& path);

Json to_json(const Hyper& h);
Hyper hyper_from_json(const Json& j, const std::string& path);

Json to_json(const MixturePrior& prior);
MixturePrior prior_from_json(const Json& j, const std::string& path);

Json to_json(const ContextSequence& context);
ContextSequence context_from_json(const Json& j, const std::string& path);

Json to_json(const TaskFunction& task);
TaskFunction task_from_json(const Json& j, const std::string& path);

Json to_json(const FittedModel& model);
FittedModel fitted_model_from_json(const Json& j, const std::string& path);

// One JSON-lines record. Label vectors are written out alongside their row indices.
Json to_json(const RetrievalInstance& instance);
// Rebuilds an instance from its record by rerunning the recorded generator.
RetrievalInstance regenerate_instance(const Json& record, const EmbeddingStore& store);

}  // namespace icl

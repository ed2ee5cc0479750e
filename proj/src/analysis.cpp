#include "triage/analysis.hpp"

namespace triage {

std::string reformat_request(const std::string& schema, const std::string& problem) {
    return "Your previous answer could not be parsed (" + problem +
           "). Respond again with only the result in exactly this format:\n" + schema;
}

}  // namespace triage

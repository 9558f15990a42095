#include "framerl/policy.hpp"

#include <utility>

#include "framerl/errors.hpp"

namespace framerl {

namespace {

class ScriptedPolicy final : public Policy {
 public:
  explicit ScriptedPolicy(std::vector<std::string> turns) : turns_(std::move(turns)) {}

  PolicyTurnResponse next_turn(const PolicyTurnRequest&) override {
    if (cursor_ >= turns_.size())
      throw ScriptExhaustedError("scripted policy asked for turn " +
                                 std::to_string(cursor_ + 1) + " but only " +
                                 std::to_string(turns_.size()) + " were provided");
    return PolicyTurnResponse{turns_[cursor_++], std::nullopt};
  }

 private:
  std::vector<std::string> turns_;
  std::size_t cursor_ = 0;
};

}  // namespace

std::unique_ptr<Policy> scripted_policy(std::vector<std::string> turns) {
  return std::make_unique<ScriptedPolicy>(std::move(turns));
}

}  // namespace framerl

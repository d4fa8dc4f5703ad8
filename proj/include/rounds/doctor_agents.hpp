#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "rounds/agent_gateway.hpp"
#include "rounds/case_model.hpp"
#include "rounds/task.hpp"

namespace rounds {

// Produces the next doctor message given the conversation so far, from the
// doctor's point of view (system prompt, then alternating assistant/user).
class DoctorAgent {
 public:
  virtual ~DoctorAgent() = default;
  virtual std::string respond(const ChatHistory& history) = 0;
};

class LlmDoctorAgent : public DoctorAgent {
 public:
  explicit LlmDoctorAgent(std::shared_ptr<ChatBackend> backend) : backend_(std::move(backend)) {}
  std::string respond(const ChatHistory& history) override { return backend_->complete(history); }

 private:
  std::shared_ptr<ChatBackend> backend_;
};

enum class ScriptedKind { Omniscient, ImmediateGuesser, RandomWalker };
std::string_view to_string(ScriptedKind k);
std::optional<ScriptedKind> parse_scripted_kind(std::string_view s);

// Diagnosis used by agents that do not know the answer.
inline constexpr std::string_view kGuesserDiagnosis = "Undifferentiated febrile illness";

// Deterministic test agents.
//
//   Omniscient        requests HPI, PMH and the physical exam, then every
//                     auxiliary exam by its stored name, then submits the
//                     gold diagnosis citing the first three exam results
//                     (topped up from other sections when fewer exist).
//   ImmediateGuesser  submits a wrong diagnosis with fabricated evidence on
//                     its first turn.
//   RandomWalker      issues seeded random requests (some invalid, some
//                     malformed) and diagnoses only when forced.
//
// All agents answer a forced-diagnosis request with a diagnosis, and in
// Task1 every agent diagnoses straight away.
std::unique_ptr<DoctorAgent> scripted_agent(ScriptedKind kind, const StructuredCase& c, Task task = Task::Task2,
                                            std::uint64_t seed = 0);

}  // namespace rounds

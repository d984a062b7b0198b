#ifndef ONCUE_BACKEND_HPP
#define ONCUE_BACKEND_HPP

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

namespace oncue {

// The six prompt templates the decision controller renders. "final_answer"
// is the engine's own closing template, not part of the five-stage protocol.
enum class TemplateId {
    part1,
    part2,
    part3,
    part4,
    part5,
    final_answer,
};

const char* template_id_name(TemplateId id);            // "part1".."part5", "final"
TemplateId template_id_from_name(const std::string& s);  // throws ConfigError

struct ReasonerRequest {
    TemplateId template_id = TemplateId::part1;
    std::string prompt;        // fully rendered template text
    int clip_index = 0;        // 0 for episode-level calls (parts 1 and 2)
    int max_tokens = 1024;
    double temperature = 0.0;  // decision calls are always greedy
    std::uint64_t seed = 0;
};

struct ReasonerResponse {
    std::string raw_text;
    std::string extracted_json;  // filled iff parsed is true
    bool parsed = false;
    double latency_ms = 0.0;
    int attempts = 1;
};

// A reasoner endpoint. invoke() is safe to call from several threads at
// once; implementations bound their own concurrency.
class ReasonerBackend {
  public:
    virtual ~ReasonerBackend() = default;
    virtual ReasonerResponse invoke(const ReasonerRequest& req) = 0;
    virtual std::string name() const = 0;
    // Total invocations served so far (including failed extraction).
    virtual int calls() const = 0;
};

// Deterministic mock: replies are looked up by (template, clip index) and
// consumed front-to-back within each key. Asking for a key with no entries
// left throws ScriptExhausted.
class ScriptedOracle final : public ReasonerBackend {
  public:
    ScriptedOracle() = default;

    // Script file shape: {"responses": [{"template": "part3", "clip": 2,
    // "text": "..."}, ...]}. "clip" defaults to 0.
    static std::shared_ptr<ScriptedOracle> from_json_text(const std::string& text);
    static std::shared_ptr<ScriptedOracle> from_file(const std::string& path);

    void add(TemplateId id, int clip_index, std::string text);
    std::string to_json_text() const;  // round-trips the remaining entries

    ReasonerResponse invoke(const ReasonerRequest& req) override;
    std::string name() const override { return "mock"; }
    int calls() const override;
    std::size_t remaining() const;

  private:
    mutable std::mutex mu_;
    std::map<std::pair<int, int>, std::deque<std::string>> scripts_;
    std::deque<std::pair<std::pair<int, int>, std::string>> order_;  // for round-trip
    int calls_ = 0;
};

struct HttpBackendConfig {
    std::string base_url;  // falls back to REASONER_BASE_URL
    std::string api_key;   // falls back to REASONER_API_KEY
    std::string model = "default";
    int max_attempts = 3;          // transport errors, 429 and 5xx retry
    double backoff_base_s = 0.5;   // 0.5s, 1s, 2s
    double attempt_timeout_s = 30.0;
    double total_deadline_s = 90.0;
    int in_flight_limit = 4;
    bool debug = false;  // request/response logging, api key redacted
};

// Chat-completions client over plain HTTP. Retries use exponential backoff
// through the injectable sleep hook so tests run without real waits.
class HttpBackend final : public ReasonerBackend {
  public:
    using SleepFn = std::function<void(double seconds)>;

    explicit HttpBackend(HttpBackendConfig cfg, SleepFn sleep = nullptr);

    ReasonerResponse invoke(const ReasonerRequest& req) override;
    std::string name() const override { return "http"; }
    int calls() const override;

    const HttpBackendConfig& config() const { return cfg_; }

  private:
    HttpBackendConfig cfg_;
    SleepFn sleep_;
    mutable std::mutex mu_;
    std::condition_variable slot_free_;
    int calls_ = 0;
    int in_flight_ = 0;
};

}  // namespace oncue

#endif  // ONCUE_BACKEND_HPP

#include "oncue/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "oncue/errors.hpp"
#include "oncue/json_extract.hpp"

namespace oncue {

namespace {

using nlohmann::json;

void apply_extraction(ReasonerResponse& resp) {
    try {
        resp.extracted_json = extract_json(resp.raw_text);
        resp.parsed = true;
    } catch (const SchemaError&) {
        resp.extracted_json.clear();
        resp.parsed = false;
    }
}

std::string redact(const std::string& key) {
    if (key.empty()) return "(none)";
    return "***" + std::string(1, key.back());
}

// "http://host:port/path" -> {"http://host:port", "/path"}
std::pair<std::string, std::string> split_url(const std::string& url) {
    std::size_t scheme = url.find("://");
    std::size_t path_at = scheme == std::string::npos
                              ? url.find('/')
                              : url.find('/', scheme + 3);
    if (path_at == std::string::npos) return {url, ""};
    return {url.substr(0, path_at), url.substr(path_at)};
}

}  // namespace

const char* template_id_name(TemplateId id) {
    switch (id) {
        case TemplateId::part1: return "part1";
        case TemplateId::part2: return "part2";
        case TemplateId::part3: return "part3";
        case TemplateId::part4: return "part4";
        case TemplateId::part5: return "part5";
        case TemplateId::final_answer: return "final";
    }
    return "?";
}

TemplateId template_id_from_name(const std::string& s) {
    if (s == "part1") return TemplateId::part1;
    if (s == "part2") return TemplateId::part2;
    if (s == "part3") return TemplateId::part3;
    if (s == "part4") return TemplateId::part4;
    if (s == "part5") return TemplateId::part5;
    if (s == "final") return TemplateId::final_answer;
    throw ConfigError("unknown template id: " + s);
}

std::shared_ptr<ScriptedOracle> ScriptedOracle::from_json_text(const std::string& text) {
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("responses") ||
        !doc["responses"].is_array()) {
        throw ConfigError("script must be an object with a \"responses\" array");
    }
    auto oracle = std::make_shared<ScriptedOracle>();
    for (const auto& entry : doc["responses"]) {
        if (!entry.is_object() || !entry.contains("template") ||
            !entry.contains("text")) {
            throw ConfigError("script entry needs \"template\" and \"text\"");
        }
        const TemplateId id =
            template_id_from_name(entry["template"].get<std::string>());
        const int clip = entry.value("clip", 0);
        oracle->add(id, clip, entry["text"].get<std::string>());
    }
    return oracle;
}

std::shared_ptr<ScriptedOracle> ScriptedOracle::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open script file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

void ScriptedOracle::add(TemplateId id, int clip_index, std::string text) {
    std::lock_guard<std::mutex> lock(mu_);
    const auto key = std::make_pair(static_cast<int>(id), clip_index);
    scripts_[key].push_back(text);
    order_.emplace_back(key, std::move(text));
}

std::string ScriptedOracle::to_json_text() const {
    std::lock_guard<std::mutex> lock(mu_);
    json entries = json::array();
    for (const auto& [key, text] : order_) {
        entries.push_back({
            {"template", template_id_name(static_cast<TemplateId>(key.first))},
            {"clip", key.second},
            {"text", text},
        });
    }
    return json{{"responses", entries}}.dump(2) + "\n";
}

ReasonerResponse ScriptedOracle::invoke(const ReasonerRequest& req) {
    std::string text;
    {
        std::lock_guard<std::mutex> lock(mu_);
        const auto key =
            std::make_pair(static_cast<int>(req.template_id), req.clip_index);
        auto it = scripts_.find(key);
        if (it == scripts_.end() || it->second.empty()) {
            throw ScriptExhausted(std::string("no scripted reply left for ") +
                                  template_id_name(req.template_id) + " clip " +
                                  std::to_string(req.clip_index));
        }
        text = std::move(it->second.front());
        it->second.pop_front();
        // Keep the round-trip view (order_) in step with consumption.
        for (auto oit = order_.begin(); oit != order_.end(); ++oit) {
            if (oit->first == key) {
                order_.erase(oit);
                break;
            }
        }
        ++calls_;
    }
    ReasonerResponse resp;
    resp.raw_text = std::move(text);
    resp.latency_ms = 0.0;
    resp.attempts = 1;
    apply_extraction(resp);
    return resp;
}

int ScriptedOracle::calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
}

std::size_t ScriptedOracle::remaining() const {
    std::lock_guard<std::mutex> lock(mu_);
    std::size_t n = 0;
    for (const auto& [key, queue] : scripts_) n += queue.size();
    return n;
}

HttpBackend::HttpBackend(HttpBackendConfig cfg, SleepFn sleep)
    : cfg_(std::move(cfg)), sleep_(std::move(sleep)) {
    if (cfg_.base_url.empty()) {
        if (const char* env = std::getenv("REASONER_BASE_URL")) cfg_.base_url = env;
    }
    if (cfg_.api_key.empty()) {
        if (const char* env = std::getenv("REASONER_API_KEY")) cfg_.api_key = env;
    }
    if (cfg_.base_url.empty()) {
        throw ConfigError("http backend needs a base url (REASONER_BASE_URL)");
    }
    if (cfg_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (cfg_.in_flight_limit < 1) throw ConfigError("in_flight_limit must be >= 1");
    if (!sleep_) {
        sleep_ = [](double seconds) {
            std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
        };
    }
}

ReasonerResponse HttpBackend::invoke(const ReasonerRequest& req) {
    {
        std::unique_lock<std::mutex> lock(mu_);
        slot_free_.wait(lock, [&] { return in_flight_ < cfg_.in_flight_limit; });
        ++in_flight_;
        ++calls_;
    }
    struct SlotGuard {
        HttpBackend* self;
        ~SlotGuard() {
            std::lock_guard<std::mutex> lock(self->mu_);
            --self->in_flight_;
            self->slot_free_.notify_one();
        }
    } guard{this};

    const auto [host, prefix] = split_url(cfg_.base_url);
    const std::string path = prefix + "/chat/completions";
    const json body = {
        {"model", cfg_.model},
        {"messages", json::array({json{{"role", "user"}, {"content", req.prompt}}})},
        {"temperature", req.temperature},
        {"max_tokens", req.max_tokens},
        {"seed", req.seed},
    };
    const std::string payload = body.dump();

    const auto started = std::chrono::steady_clock::now();
    auto elapsed_s = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             started)
            .count();
    };

    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
        if (cfg_.debug) {
            std::cerr << "[http] POST " << host << path << " model=" << cfg_.model
                      << " template=" << template_id_name(req.template_id)
                      << " clip=" << req.clip_index << " attempt=" << attempt
                      << " auth=" << redact(cfg_.api_key) << "\n";
        }
        httplib::Client client(host);
        client.set_connection_timeout(std::chrono::duration<double>(cfg_.attempt_timeout_s));
        client.set_read_timeout(std::chrono::duration<double>(cfg_.attempt_timeout_s));
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        }
        auto res = client.Post(path, headers, payload, "application/json");

        bool retryable = false;
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            retryable = true;
        } else if (res->status == 429 || res->status >= 500) {
            last_error = "status " + std::to_string(res->status);
            retryable = true;
        } else if (res->status != 200) {
            throw BackendError("reasoner endpoint returned status " +
                               std::to_string(res->status));
        } else {
            json doc = json::parse(res->body, nullptr, false);
            if (doc.is_discarded() || !doc.contains("choices") ||
                !doc["choices"].is_array() || doc["choices"].empty()) {
                throw BackendError("malformed chat-completions envelope");
            }
            const auto& choice = doc["choices"][0];
            if (!choice.contains("message") ||
                !choice["message"].contains("content")) {
                throw BackendError("chat-completions reply has no message content");
            }
            ReasonerResponse resp;
            resp.raw_text = choice["message"]["content"].get<std::string>();
            resp.latency_ms = elapsed_s() * 1000.0;
            resp.attempts = attempt;
            apply_extraction(resp);
            if (cfg_.debug) {
                std::cerr << "[http] reply " << resp.raw_text.size() << " bytes, "
                          << (resp.parsed ? "parsed" : "unparsed") << "\n";
            }
            return resp;
        }

        if (cfg_.debug) {
            std::cerr << "[http] attempt " << attempt << " failed: " << last_error
                      << "\n";
        }
        if (attempt == cfg_.max_attempts) break;
        const double wait = cfg_.backoff_base_s * static_cast<double>(1 << (attempt - 1));
        if (elapsed_s() + wait > cfg_.total_deadline_s) break;
        sleep_(wait);
    }
    throw BackendError("reasoner call failed after retries: " + last_error);
}

int HttpBackend::calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
}

}  // namespace oncue

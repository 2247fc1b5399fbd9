#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "twinwatch/core/errors.hpp"

namespace twinwatch::twin {

using MessageHandler = std::function<void(const std::string& topic, const std::string& payload)>;

/// Publish/subscribe transport. Two interchangeable implementations sit
/// behind this contract: the in-memory bus below and the MQTT client.
class Transport {
public:
  virtual ~Transport() = default;
  virtual void publish(const std::string& topic, const std::string& payload) = 0;
  virtual void subscribe(const std::string& topic, MessageHandler handler) = 0;
  virtual bool connected() const = 0;
};

/// Ordered, lossless, synchronous bus: publish() invokes every handler
/// subscribed to the topic before returning, FIFO per topic. Handlers may
/// publish from inside a delivery.
class InMemoryBus : public Transport {
public:
  void publish(const std::string& topic, const std::string& payload) override {
    std::vector<MessageHandler> targets;
    {
      std::lock_guard lock(mu_);
      auto it = subs_.find(topic);
      if (it != subs_.end()) targets = it->second;
    }
    for (auto& h : targets) h(topic, payload);
  }

  void subscribe(const std::string& topic, MessageHandler handler) override {
    std::lock_guard lock(mu_);
    subs_[topic].push_back(std::move(handler));
  }

  bool connected() const override { return true; }

private:
  std::mutex mu_;
  std::map<std::string, std::vector<MessageHandler>> subs_;
};

/// Robot-to-twin topic wiring and delivery settings.
struct TopicConfig {
  std::string broker_url = "tcp://localhost:1883";
  std::string state_topic = "tessla";
  std::string action_topic = "action";
  std::string payload_format = "json";
  int qos = 1;

  void validate() const {
    if (state_topic.empty() || action_topic.empty())
      throw ConfigError("topics must be non-empty");
    if (state_topic == action_topic)
      throw ConfigError("state and action topics must be distinct");
    if (payload_format != "json")
      throw ConfigError("payload_format must be 'json'");
    if (qos != 0 && qos != 1)
      throw ConfigError("qos must be 0 or 1");
  }
};

} // namespace twinwatch::twin

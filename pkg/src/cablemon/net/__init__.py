"""Protocol codecs and endpoints: a Modbus-TCP subset and an MQTT 3.1.1 subset."""

from .errors import IncompleteFrame, MalformedPacket
from .modbus import (
    ModbusClient,
    ModbusError,
    ModbusFrame,
    ModbusServerCore,
    PollTimeout,
    modbus_decode,
    modbus_encode,
    modbus_poll,
)
from .mqtt import mqtt_decode, mqtt_encode, topic_matches

__all__ = [
    "IncompleteFrame",
    "MalformedPacket",
    "ModbusClient",
    "ModbusError",
    "ModbusFrame",
    "ModbusServerCore",
    "PollTimeout",
    "modbus_decode",
    "modbus_encode",
    "modbus_poll",
    "mqtt_decode",
    "mqtt_encode",
    "topic_matches",
]

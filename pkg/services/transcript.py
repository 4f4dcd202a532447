"""
Transcript Service

Linear, typed message log of one protocol run and its versioned JSON form.

A transcript document:

    {
      "version": 1,
      "protocol": "ot1" | "ot4" | "selftest",
      "config": {...resolved ProtocolConfig...},
      "messages": [{"step", "sender_of_message", "recipients", "payload", "round_index"}, ...],
      "records": [...per-round data, including every party's private values...],
      "inputs": {...run-level inputs such as hash descriptors and the choice bit...},
      "derived": {...values recomputed and compared by the replayer...}
    }

Bit strings inside payloads are encoded as {"hex": ..., "bits": n}.

Author: DIOT Lab Development Team
"""

import json
import logging
from dataclasses import dataclass, field

from middleware.error_handlers import TranscriptError
from utils.file_utils import canonical_json, write_atomic

logger = logging.getLogger(__name__)

TRANSCRIPT_VERSION = 1
PARTIES = ('sender', 'receiver', 'device_a', 'device_b')
PROTOCOLS = ('ot1', 'ot4', 'selftest')


@dataclass(frozen=True)
class Message:
    step: str
    sender_of_message: str
    recipients: tuple
    payload: dict
    round_index: int = None

    def to_dict(self):
        return {
            'step': self.step,
            'sender_of_message': self.sender_of_message,
            'recipients': list(self.recipients),
            'payload': self.payload,
            'round_index': self.round_index,
        }

    @classmethod
    def from_dict(cls, document):
        try:
            return cls(str(document['step']), str(document['sender_of_message']),
                       tuple(document['recipients']), dict(document['payload']),
                       document.get('round_index'))
        except (KeyError, TypeError, ValueError) as e:
            raise TranscriptError(f"malformed message: {e}") from e


@dataclass
class Transcript:
    protocol: str
    config: dict
    messages: list = field(default_factory=list)
    records: list = field(default_factory=list)
    inputs: dict = field(default_factory=dict)
    derived: dict = field(default_factory=dict)

    def send(self, step, sender, recipients, payload, round_index=None):
        """Append one message; ``recipients`` is a party name or a sequence of them."""
        if isinstance(recipients, str):
            recipients = (recipients,)
        for party in (sender, *recipients):
            if party not in PARTIES:
                raise TranscriptError(f"unknown party '{party}'")
        message = Message(step, sender, tuple(recipients), payload, round_index)
        self.messages.append(message)
        return message

    def view(self, party):
        """Messages the party sent or received, in order."""
        return [m for m in self.messages if m.sender_of_message == party or party in m.recipients]

    def view_key(self, party):
        """Canonical text of a party's view, usable as a distribution key."""
        return canonical_json([m.to_dict() for m in self.view(party)])

    def to_dict(self):
        return {
            'version': TRANSCRIPT_VERSION,
            'protocol': self.protocol,
            'config': self.config,
            'messages': [m.to_dict() for m in self.messages],
            'records': self.records,
            'inputs': self.inputs,
            'derived': self.derived,
        }

    @classmethod
    def from_dict(cls, document):
        if not isinstance(document, dict):
            raise TranscriptError("transcript must be a JSON object")
        version = document.get('version')
        if version != TRANSCRIPT_VERSION:
            raise TranscriptError(f"unsupported transcript version {version!r}")
        protocol = document.get('protocol')
        if protocol not in PROTOCOLS:
            raise TranscriptError(f"unknown protocol {protocol!r}")
        try:
            return cls(protocol, dict(document['config']),
                       [Message.from_dict(m) for m in document['messages']],
                       list(document['records']), dict(document['inputs']), dict(document['derived']))
        except (KeyError, TypeError, ValueError) as e:
            raise TranscriptError(f"malformed transcript: {e}") from e


def save_transcript(transcript, path):
    write_atomic(path, canonical_json(transcript.to_dict()) + '\n')
    logger.debug(f"transcript written to {path}")


def load_transcript(path):
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            document = json.load(handle)
    except OSError as e:
        raise TranscriptError(f"cannot read transcript {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise TranscriptError(f"transcript {path} does not parse: {e}") from e
    return Transcript.from_dict(document)

"""A small grammar-generated two-domain corpus (alarm, reminder) in TopV2 label style."""
from __future__ import annotations

import random
import re

from .dataset import Record
from .ontology import make_frame

CLOCK = ["6 am", "7 am", "6:30 am", "7:15 am", "8 pm", "9 pm", "noon", "midnight", "5 pm",
         "10:45 pm", "4 am", "11 am", "5:30", "8", "9:15"]
DAYS = ["today", "tomorrow", "monday", "tuesday", "wednesday", "thursday", "friday",
        "saturday", "sunday"]
WEEKDAYS = DAYS[2:]
NUMBERS = ["two", "three", "four", "5", "10", "15", "20", "30"]


def _date_time(rng):
    clock, day, wd = rng.choice(CLOCK), rng.choice(DAYS), rng.choice(WEEKDAYS)
    return rng.choice([
        f"at {clock}", f"{day} at {clock}", f"for {clock} {day}", day, f"{day} morning",
        "tonight", "this afternoon", f"on {wd}", f"on {wd} at {clock}",
        f"in {rng.choice(NUMBERS)} minutes",
    ])


def _recurring(rng):
    wd = rng.choice(WEEKDAYS)
    return rng.choice([f"every {wd}", "every day", "every morning", "on weekdays",
                       "every weekend", "daily", "each night", f"every {wd} night",
                       "every other day", "weekly"])


def _duration(rng):
    n = rng.choice(NUMBERS)
    return rng.choice([f"for {n} minutes", f"{n} minutes", f"{n} more minutes", "an hour",
                       f"for {n} mins"])


# Deliverables overlap on purpose: most errands can be an alarm name or a
# to-do. A few stay domain-specific.
_SHARED_ERRANDS = ["take my pills", "go to the gym", "pick up the kids", "laundry",
                   "leave for work", "walk the dog", "workout", "medicine", "meeting",
                   "dentist", "call mom", "pay rent", "school", "feed the cat"]

FILLERS = {
    "SL:DATE_TIME": _date_time,
    "SL:DATE_TIME_NEW": _date_time,
    "SL:DATE_TIME_RECURRING": _recurring,
    "SL:RECURRING_DATE_TIME": _recurring,
    "SL:DURATION": _duration,
    "SL:ALARM_NAME": lambda rng: rng.choice(_SHARED_ERRANDS + ["wake up", "nap", "morning run"]),
    "SL:TODO": lambda rng: rng.choice(_SHARED_ERRANDS + [
        "buy milk", "water the plants", "email john", "take out the trash",
        "renew my passport"]),
    "SL:PERSON_REMINDED": lambda rng: rng.choice([
        "dad", "my wife", "sarah", "the kids", "mike", "my team", "grandma", "alex"]),
    "SL:AMOUNT": lambda rng: rng.choice(NUMBERS[:5]),
    "SL:ORDINAL": lambda rng: rng.choice(["first", "second", "last", "next", "third"]),
}

# Both domains share carrier phrases and mention each other's nouns, as real
# assistant traffic does; otherwise a leave-one-domain-out tagger would meet
# the held-out domain's head noun for the first time at test time.
GRAMMAR = {
    "alarm": {
        "IN:CREATE_ALARM": [
            "set an alarm {SL:DATE_TIME}", "set an alarm {SL:DATE_TIME} to {SL:ALARM_NAME}",
            "set an alarm to {SL:ALARM_NAME} {SL:DATE_TIME}",
            "set a {SL:ALARM_NAME} alarm {SL:DATE_TIME}", "wake me up {SL:DATE_TIME}",
            "set an alarm {SL:DATE_TIME} {SL:DATE_TIME_RECURRING}",
            "create an alarm {SL:DATE_TIME_RECURRING} to {SL:ALARM_NAME}",
            "set {SL:AMOUNT} alarms {SL:DATE_TIME}", "i need an alarm {SL:DATE_TIME}",
            "set an alarm not a reminder {SL:DATE_TIME} to {SL:ALARM_NAME}",
            "i need an alarm as a reminder to {SL:ALARM_NAME}",
        ],
        "IN:DELETE_ALARM": [
            "delete my alarm {SL:DATE_TIME}", "cancel the {SL:ALARM_NAME} alarm",
            "delete all alarms", "delete the {SL:ORDINAL} alarm",
            "cancel the alarm to {SL:ALARM_NAME} {SL:DATE_TIME}",
            "turn off my alarms {SL:DATE_TIME}", "delete the alarm but keep the reminder",
        ],
        "IN:GET_ALARM": [
            "what are my alarms {SL:DATE_TIME}", "show my alarms", "do i have any alarms",
            "show me my next {SL:AMOUNT} alarms", "when is my {SL:ALARM_NAME} alarm",
            "show alarms {SL:DATE_TIME_RECURRING}", "show my alarms not my reminders",
        ],
        "IN:SNOOZE_ALARM": [
            "snooze the alarm {SL:DURATION}", "snooze {SL:DURATION}", "snooze the alarm",
            "snooze my {SL:ALARM_NAME} alarm {SL:DURATION}", "snooze the alarm not the reminder",
        ],
        "IN:SILENCE_ALARM": [
            "turn off the alarm", "stop the alarm", "silence my {SL:ALARM_NAME} alarm",
            "stop the alarm now", "turn off the alarm now",
        ],
        "IN:UPDATE_ALARM": [
            "move my alarm to {SL:ALARM_NAME} to {SL:DATE_TIME_NEW}",
            "change the {SL:ALARM_NAME} alarm to {SL:DATE_TIME_NEW}",
            "change my {SL:DATE_TIME} alarm to {SL:DATE_TIME_NEW}",
        ],
    },
    "reminder": {
        "IN:CREATE_REMINDER": [
            "set a reminder {SL:DATE_TIME} to {SL:TODO}",
            "set a reminder to {SL:TODO} {SL:DATE_TIME}", "remind me to {SL:TODO} {SL:DATE_TIME}",
            "set a {SL:TODO} reminder {SL:DATE_TIME}",
            "set a reminder to {SL:TODO} {SL:RECURRING_DATE_TIME}",
            "create a reminder {SL:RECURRING_DATE_TIME} to {SL:TODO}",
            "remind {SL:PERSON_REMINDED} to {SL:TODO} {SL:DATE_TIME}",
            "i need a reminder to {SL:TODO}", "i need a reminder {SL:DATE_TIME}",
            "set a reminder not an alarm {SL:DATE_TIME} to {SL:TODO}",
            "remind me to {SL:TODO} when my alarm goes off",
        ],
        "IN:DELETE_REMINDER": [
            "delete my reminder {SL:DATE_TIME}", "cancel the {SL:TODO} reminder",
            "delete all reminders", "delete the {SL:ORDINAL} reminder",
            "cancel the reminder to {SL:TODO} {SL:DATE_TIME}",
            "turn off my reminders {SL:DATE_TIME}", "delete the reminder but keep the alarm",
            "turn off the reminder", "stop the reminder",
        ],
        "IN:GET_REMINDER": [
            "what are my reminders {SL:DATE_TIME}", "show my reminders",
            "do i have any reminders", "show me my next {SL:AMOUNT} reminders",
            "when is my {SL:TODO} reminder", "show reminders {SL:RECURRING_DATE_TIME}",
            "show reminders for {SL:PERSON_REMINDED}", "show my reminders not my alarms",
        ],
        "IN:SNOOZE_REMINDER": [
            "snooze the reminder {SL:DURATION}", "snooze {SL:DURATION}", "snooze the reminder",
            "snooze my {SL:TODO} reminder {SL:DURATION}", "snooze the reminder not the alarm",
        ],
        "IN:UPDATE_REMINDER_DATE_TIME": [
            "move my reminder to {SL:TODO} to {SL:DATE_TIME_NEW}",
            "change the {SL:TODO} reminder to {SL:DATE_TIME_NEW}",
            "change my {SL:DATE_TIME} reminder to {SL:DATE_TIME_NEW}",
        ],
    },
}

_SLOT = re.compile(r"\{(SL:[A-Z_]+)\}")


def realize(pattern: str, rng: random.Random):
    """Fill a pattern; returns ``(tokens, [(start, end, label), ...])``."""
    tokens: list[str] = []
    slots = []
    for piece in _SLOT.split(pattern):
        if piece.startswith("SL:"):
            words = FILLERS[piece](rng).split()
            slots.append((len(tokens), len(tokens) + len(words), piece))
            tokens.extend(words)
        else:
            tokens.extend(piece.split())
    return tokens, slots


def generate_toy_corpus(n_per_domain: int = 1000, seed: int = 0,
                        split_fractions=(0.7, 0.1, 0.2)) -> list[Record]:
    """Sample ``n_per_domain`` utterances per domain and split them train/eval/test."""
    rng = random.Random(seed)
    records = []
    for domain, intents in GRAMMAR.items():
        n_train = round(n_per_domain * split_fractions[0])
        n_eval = round(n_per_domain * split_fractions[1])
        names = sorted(intents)
        for i in range(n_per_domain):
            intent = rng.choice(names)
            tokens, slots = realize(rng.choice(intents[intent]), rng)
            split = "train" if i < n_train else "eval" if i < n_train + n_eval else "test"
            frame = make_frame(intent, len(tokens), slots, domain)
            records.append(Record(tuple(tokens), frame, domain, split))
    return records

"""Default prompt templates for action classes.

"[CLS]" marks where the class name is substituted.
"""

DEFAULT_TEMPLATES = (
    "a photo of action [CLS]",
    "a picture of action [CLS]",
    "Human action of [CLS]",
    "[CLS], an action",
    "[CLS] this is an action",
    "[CLS], a video of action",
    "Playing action of [CLS]",
    "[CLS]",
    "Playing a kind of action, [CLS]",
    "Doing a kind of action, [CLS]",
    "Look, the human is [CLS]",
    "Can you recognize the action of [CLS]?",
    "Video classification of [CLS]",
    "A video of [CLS]",
    "The man is [CLS]",
    "The woman is [CLS]",
)


def fill_template(template: str, class_name: str) -> str:
    return template.replace("[CLS]", class_name)

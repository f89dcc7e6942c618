import os
import glob
import jinja2

CURRENT_FILE_PATH = os.path.dirname(os.path.abspath(__file__))


class TemplateManager:
    """
    A manager for text report templates.
    Every <name>.j2 file of the directory is loaded once and rendered by name.
    """

    def __init__(self, template_dir: str = CURRENT_FILE_PATH):
        self.templates = {}
        for template in glob.glob(os.path.join(template_dir, "*.j2")):
            with open(template, encoding="utf-8") as f:
                self.templates[os.path.basename(template).replace(".j2", "")] = jinja2.Template(
                    f.read(), trim_blocks=True, lstrip_blocks=True
                )

    def render(self, name: str, **kwargs) -> str:
        """
        Render a template with the given name and kwargs.
        Args:
            name: The name of the template to render.
            **kwargs: The variables the template reads.
        Returns:
            The rendered template.
        """
        if name not in self.templates:
            raise KeyError(f"No template named {name!r}, known: {sorted(self.templates)}")
        return self.templates[name].render(**kwargs)


template_manager = TemplateManager()

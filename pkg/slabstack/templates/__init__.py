from slabstack.templates.template_manager import TemplateManager, template_manager

import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'radonshell_project.settings')
django.setup()
